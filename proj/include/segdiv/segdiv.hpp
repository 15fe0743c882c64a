#pragma once

#include "segdiv/allocation.hpp"
#include "segdiv/ambiguity.hpp"
#include "segdiv/collection_store.hpp"
#include "segdiv/distance_transform.hpp"
#include "segdiv/diversity.hpp"
#include "segdiv/error.hpp"
#include "segdiv/evaluation.hpp"
#include "segdiv/features.hpp"
#include "segdiv/image.hpp"
#include "segdiv/linear_scorer.hpp"
#include "segdiv/manifest.hpp"
#include "segdiv/mask.hpp"
#include "segdiv/model_io.hpp"
#include "segdiv/pca.hpp"
#include "segdiv/plan.hpp"
#include "segdiv/random.hpp"
#include "segdiv/report.hpp"
#include "segdiv/saliency.hpp"
#include "segdiv/score_io.hpp"
#include "segdiv/synthetic.hpp"
