#pragma once

#include "exitnet/checkpoint.hpp"
#include "exitnet/cli.hpp"
#include "exitnet/config.hpp"
#include "exitnet/csv.hpp"
#include "exitnet/dataset.hpp"
#include "exitnet/errors.hpp"
#include "exitnet/gradcheck.hpp"
#include "exitnet/inference.hpp"
#include "exitnet/manifest.hpp"
#include "exitnet/model.hpp"
#include "exitnet/ops.hpp"
#include "exitnet/tape.hpp"
#include "exitnet/tensor.hpp"
#include "exitnet/train.hpp"
