#pragma once

#include "npmv/bandwidth.hpp"
#include "npmv/confidence_band.hpp"
#include "npmv/covariance.hpp"
#include "npmv/dataio.hpp"
#include "npmv/dataset.hpp"
#include "npmv/error.hpp"
#include "npmv/geoquantile.hpp"
#include "npmv/kernels.hpp"
#include "npmv/mean.hpp"
#include "npmv/parallel.hpp"
#include "npmv/risk.hpp"
#include "npmv/sim.hpp"
#include "npmv/version.hpp"
