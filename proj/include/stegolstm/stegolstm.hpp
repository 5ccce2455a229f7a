#pragma once

#include "stegolstm/codec.hpp"
#include "stegolstm/corpus.hpp"
#include "stegolstm/error.hpp"
#include "stegolstm/keying.hpp"
#include "stegolstm/lm.hpp"
#include "stegolstm/lstm.hpp"
#include "stegolstm/metrics.hpp"
#include "stegolstm/model_io.hpp"
#include "stegolstm/ngram.hpp"
