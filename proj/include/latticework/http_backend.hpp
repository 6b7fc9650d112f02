#pragma once
// Chat-completion style HTTP(S) backend. One wire protocol for every role;
// the role only selects the model name. Bearer token comes from the
// environment variable named by BackendConfig::token_env.

#include "latticework/backend.hpp"

namespace lw {

class HttpBackend final : public ModelBackend {
public:
    explicit HttpBackend(BackendConfig config);

protected:
    std::string complete(const Request& request, const std::string& prompt) override;
    std::vector<double> score(const std::string& query, const std::vector<std::string>& documents) override;
};

} // namespace lw
