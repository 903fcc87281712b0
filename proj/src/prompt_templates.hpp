#pragma once

namespace hanrag::detail {

extern const char* const k_router_template;
extern const char* const k_decomposer_template;
extern const char* const k_refiner_template;
extern const char* const k_relevance_template;
extern const char* const k_generator_template;
extern const char* const k_ending_template;
extern const char* const k_single_qa_gen_template;
extern const char* const k_compound_compose_template;

}  // namespace hanrag::detail
