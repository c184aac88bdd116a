#pragma once

// Umbrella header.

#include "phonotrack/error.hpp"
#include "phonotrack/fft.hpp"
#include "phonotrack/signal.hpp"
#include "phonotrack/wavelets.hpp"
#include "phonotrack/io.hpp"
#include "phonotrack/envelopes.hpp"
#include "phonotrack/segmentation.hpp"
#include "phonotrack/hr.hpp"
#include "phonotrack/bp_model.hpp"
#include "phonotrack/quality.hpp"
#include "phonotrack/evaluation.hpp"
#include "phonotrack/synth.hpp"
#include "phonotrack/config.hpp"
#include "phonotrack/plot.hpp"
#include "phonotrack/commands.hpp"
