#pragma once

#include "ecgtwin/biquad.hpp"
#include "ecgtwin/bounded_queue.hpp"
#include "ecgtwin/device.hpp"
#include "ecgtwin/filter_design.hpp"
#include "ecgtwin/pipeline.hpp"
#include "ecgtwin/qrs.hpp"
#include "ecgtwin/recording_io.hpp"
#include "ecgtwin/roc.hpp"
#include "ecgtwin/signal.hpp"
#include "ecgtwin/spectral.hpp"
#include "ecgtwin/streaming.hpp"
#include "ecgtwin/transport.hpp"
#include "ecgtwin/wire.hpp"
