#pragma once

#include "spillscm/errors.hpp"
#include "spillscm/random.hpp"
#include "spillscm/linalg.hpp"
#include "spillscm/panel.hpp"
#include "spillscm/identify.hpp"
#include "spillscm/horseshoe.hpp"
#include "spillscm/chain.hpp"
#include "spillscm/weights_sampler.hpp"
#include "spillscm/sar_sampler.hpp"
#include "spillscm/pipeline.hpp"
#include "spillscm/effects.hpp"
#include "spillscm/baselines.hpp"
#include "spillscm/simulate.hpp"
#include "spillscm/io.hpp"
#include "spillscm/commands.hpp"
