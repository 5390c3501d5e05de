#pragma once

#include "seqlcd/common.hpp"
#include "seqlcd/descriptor.hpp"
#include "seqlcd/diffmatrix.hpp"
#include "seqlcd/eval.hpp"
#include "seqlcd/imaging.hpp"
#include "seqlcd/matcher.hpp"
#include "seqlcd/model.hpp"
#include "seqlcd/pipeline.hpp"
#include "seqlcd/synthgen.hpp"
