#pragma once

// Umbrella header.

#include "egovqa/backend.hpp"
#include "egovqa/config.hpp"
#include "egovqa/error.hpp"
#include "egovqa/frame_plan.hpp"
#include "egovqa/harness.hpp"
#include "egovqa/http_backend.hpp"
#include "egovqa/media.hpp"
#include "egovqa/planner.hpp"
#include "egovqa/postprocess.hpp"
#include "egovqa/preprocess.hpp"
#include "egovqa/prototype.hpp"
#include "egovqa/question.hpp"
#include "egovqa/timeline.hpp"
#include "egovqa/timestamp.hpp"
#include "egovqa/util.hpp"
