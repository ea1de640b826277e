#pragma once

// Core library: tensors, layers, losses, model training, evaluation,
// hyper-search, datasets, the SVM baseline and report rendering. The
// command layer lives in rnnsec/pipeline.hpp.

#include "rnnsec/error.hpp"
#include "rnnsec/tensor.hpp"
#include "rnnsec/parallel.hpp"
#include "rnnsec/layers.hpp"
#include "rnnsec/objective.hpp"
#include "rnnsec/dataset.hpp"
#include "rnnsec/model.hpp"
#include "rnnsec/evaluation.hpp"
#include "rnnsec/search.hpp"
#include "rnnsec/svm.hpp"
#include "rnnsec/report.hpp"
