#pragma once

#include "flowlin/catalog.hpp"
#include "flowlin/edmd.hpp"
#include "flowlin/embed.hpp"
#include "flowlin/errors.hpp"
#include "flowlin/flows.hpp"
#include "flowlin/linalg.hpp"
#include "flowlin/obstruct.hpp"
#include "flowlin/parallel.hpp"
#include "flowlin/phase.hpp"
#include "flowlin/pipeline.hpp"
#include "flowlin/pinched.hpp"
