#ifndef PROTOFLOW_COMPLETION_HPP
#define PROTOFLOW_COMPLETION_HPP

#include "protoflow/dsl_spec.hpp"
#include "protoflow/gateway.hpp"
#include "protoflow/program.hpp"

namespace protoflow::flow {

// Latent-semantics completion. Known unknowns: proxy-named values
// ("room temperature") ground through the spec alias tables. Unknown
// unknowns: required quantity parameters left pending fill from the
// slot's or parameter's suggested default, then a gateway completion,
// and otherwise become <<<MASK>>> with a review flag. Idempotent:
// applying it twice equals applying it once.
DslProgram complete_parameters(DslProgram program, const dsl::DslSpec& spec,
                               ExtractorGateway& gateway);

}  // namespace protoflow::flow

#endif
