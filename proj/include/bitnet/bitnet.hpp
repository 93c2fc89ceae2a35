// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "bitnet/bench.hpp"
#include "bitnet/chat_template.hpp"
#include "bitnet/config.hpp"
#include "bitnet/error.hpp"
#include "bitnet/format.hpp"
#include "bitnet/kernel.hpp"
#include "bitnet/matrix.hpp"
#include "bitnet/model.hpp"
#include "bitnet/pack.hpp"
#include "bitnet/parallel.hpp"
#include "bitnet/quant.hpp"
#include "bitnet/tokenizer.hpp"
