#pragma once

#include "loccal/bundle.hpp"
#include "loccal/corpus.hpp"
#include "loccal/detector.hpp"
#include "loccal/dmap.hpp"
#include "loccal/error.hpp"
#include "loccal/eval.hpp"
#include "loccal/features.hpp"
#include "loccal/kmeans.hpp"
#include "loccal/linalg.hpp"
#include "loccal/mlp.hpp"
#include "loccal/parallel.hpp"
#include "loccal/pca.hpp"
#include "loccal/pipeline.hpp"
#include "loccal/predictor.hpp"
#include "loccal/random.hpp"
#include "loccal/report.hpp"
#include "loccal/scorers.hpp"
#include "loccal/synth.hpp"
