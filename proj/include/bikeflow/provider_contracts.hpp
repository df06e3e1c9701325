#pragma once

// Request/response checks shared by every provider implementation.

#include <string>
#include <vector>

#include "bikeflow/providers.hpp"

namespace bikeflow {

void check_edit_request(const std::string& prompt, int n);
void check_describe_request(const std::string& system_prompt, const std::string& user_prompt);
void check_judge_request(const std::string& prompt);

void check_edit_response(const Image& input, const std::vector<Image>& out, int n);
void check_mask_response(const Image& input, const Mask& mask);
void check_embedding_response(const EmbeddingVector& v);

}  // namespace bikeflow
