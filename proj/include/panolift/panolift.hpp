#pragma once

#include "panolift/core.hpp"
#include "panolift/io.hpp"
#include "panolift/fusion.hpp"
#include "panolift/projection.hpp"
#include "panolift/splat.hpp"
#include "panolift/completion.hpp"
#include "panolift/distortion.hpp"
#include "panolift/metrics.hpp"
#include "panolift/pipeline.hpp"
#include "panolift/synthetic.hpp"
