#pragma once

#include "compass/biodose.hpp"
#include "compass/cohort.hpp"
#include "compass/error.hpp"
#include "compass/features.hpp"
#include "compass/gru_autoencoder.hpp"
#include "compass/heatmap.hpp"
#include "compass/lopo.hpp"
#include "compass/parallel.hpp"
#include "compass/plot.hpp"
#include "compass/preprocess.hpp"
#include "compass/risk_classifier.hpp"
#include "compass/rng.hpp"
#include "compass/stats.hpp"
#include "compass/volume.hpp"
