#pragma once

#include "sknj/block_merge.hpp"
#include "sknj/candidate_set.hpp"
#include "sknj/counters.hpp"
#include "sknj/datagen.hpp"
#include "sknj/dataset.hpp"
#include "sknj/errors.hpp"
#include "sknj/inverted_lists.hpp"
#include "sknj/join.hpp"
#include "sknj/kernels.hpp"
#include "sknj/oracle.hpp"
#include "sknj/sparse_vector.hpp"
