#pragma once

// Umbrella header for the classification library (everything but the
// network service, which pulls in Boost).

#include "audio.hpp"
#include "corpus.hpp"
#include "error.hpp"
#include "eval.hpp"
#include "frequency_set.hpp"
#include "gda.hpp"
#include "model_io.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "riskopt.hpp"
#include "spectra.hpp"
#include "synth.hpp"
#include "tasks.hpp"
