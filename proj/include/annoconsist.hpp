#pragma once

#include "annoconsist/core.hpp"
#include "annoconsist/rng.hpp"
#include "annoconsist/codec.hpp"
#include "annoconsist/synthgen.hpp"
#include "annoconsist/dataset_io.hpp"
#include "annoconsist/matrix.hpp"
#include "annoconsist/scorer.hpp"
#include "annoconsist/loss.hpp"
#include "annoconsist/prepared.hpp"
#include "annoconsist/condnet.hpp"
#include "annoconsist/prednet.hpp"
#include "annoconsist/disco.hpp"
#include "annoconsist/eval.hpp"
#include "annoconsist/parallel.hpp"
#include "annoconsist/train.hpp"
#include "annoconsist/config.hpp"
#include "annoconsist/checkpoint.hpp"
#include "annoconsist/ablation.hpp"
#include "annoconsist/predio.hpp"
#include "annoconsist/render.hpp"
