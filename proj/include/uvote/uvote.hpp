#pragma once

#include "uvote/adam.hpp"
#include "uvote/aggregate.hpp"
#include "uvote/common.hpp"
#include "uvote/dataset.hpp"
#include "uvote/density.hpp"
#include "uvote/experiment.hpp"
#include "uvote/layer.hpp"
#include "uvote/loss.hpp"
#include "uvote/matrix.hpp"
#include "uvote/metrics.hpp"
#include "uvote/model.hpp"
#include "uvote/rng.hpp"
#include "uvote/synthetic.hpp"
#include "uvote/train.hpp"
