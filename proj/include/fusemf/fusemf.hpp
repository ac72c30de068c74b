#pragma once

#include "fusemf/error.hpp"
#include "fusemf/random.hpp"
#include "fusemf/schema.hpp"
#include "fusemf/blockops.hpp"
#include "fusemf/init.hpp"
#include "fusemf/factorizer.hpp"
#include "fusemf/nnls.hpp"
#include "fusemf/predict.hpp"
#include "fusemf/ranksel.hpp"
#include "fusemf/flat.hpp"
#include "fusemf/stats.hpp"
#include "fusemf/eval.hpp"
#include "fusemf/synth.hpp"
#include "fusemf/fixtures.hpp"
#include "fusemf/study.hpp"
#include "fusemf/io.hpp"
