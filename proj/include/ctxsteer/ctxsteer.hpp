#pragma once

#include "ctxsteer/error.hpp"
#include "ctxsteer/matrix.hpp"
#include "ctxsteer/rng.hpp"
#include "ctxsteer/parallel.hpp"
#include "ctxsteer/compressors.hpp"
#include "ctxsteer/rlz.hpp"
#include "ctxsteer/distances.hpp"
#include "ctxsteer/matrix_io.hpp"
#include "ctxsteer/clustering.hpp"
#include "ctxsteer/steering.hpp"
#include "ctxsteer/metrics.hpp"
#include "ctxsteer/forest.hpp"
#include "ctxsteer/kmeans.hpp"
#include "ctxsteer/feature_select.hpp"
#include "ctxsteer/evaluation.hpp"
#include "ctxsteer/corpus.hpp"
#include "ctxsteer/synthetic.hpp"
