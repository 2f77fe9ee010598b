#pragma once

#include "signbow/classifier.hpp"
#include "signbow/common.hpp"
#include "signbow/dataset.hpp"
#include "signbow/eval.hpp"
#include "signbow/gaussian.hpp"
#include "signbow/handshape.hpp"
#include "signbow/hmm.hpp"
#include "signbow/kmeans.hpp"
#include "signbow/model_io.hpp"
#include "signbow/movement.hpp"
#include "signbow/parallel.hpp"
#include "signbow/position.hpp"
#include "signbow/random.hpp"
#include "signbow/synth.hpp"
