#pragma once

#include "loadcast/error.hpp"
#include "loadcast/time.hpp"
#include "loadcast/ingest.hpp"
#include "loadcast/lived_io.hpp"
#include "loadcast/replay.hpp"
#include "loadcast/windowing.hpp"
#include "loadcast/matrix.hpp"
#include "loadcast/features.hpp"
#include "loadcast/models/kmeans.hpp"
#include "loadcast/models/naive_bayes.hpp"
#include "loadcast/models/decision_tree.hpp"
#include "loadcast/models/linear_svm.hpp"
#include "loadcast/models/model.hpp"
#include "loadcast/evaluation/metrics.hpp"
#include "loadcast/evaluation/walk_forward.hpp"
#include "loadcast/evaluation/stability.hpp"
#include "loadcast/evaluation/selection.hpp"
#include "loadcast/pipeline.hpp"
#include "loadcast/runtime.hpp"
#include "loadcast/config.hpp"
#include "loadcast/cli.hpp"
