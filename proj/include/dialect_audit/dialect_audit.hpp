#pragma once

#include "dialect_audit/adapters.hpp"
#include "dialect_audit/audit.hpp"
#include "dialect_audit/corpus.hpp"
#include "dialect_audit/demotopic.hpp"
#include "dialect_audit/langid.hpp"
#include "dialect_audit/manifest.hpp"
