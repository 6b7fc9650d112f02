#pragma once
// Deterministic in-process backend. Every reply is a pure function of the
// request's task and structured context; see README for the conventions
// (hashtags drive grouping, tasks and utility).

#include "latticework/backend.hpp"

namespace lw {

class MockBackend final : public ModelBackend {
public:
    explicit MockBackend(BackendConfig config = {});

    bool is_mock() const override { return true; }

    // Normalized token overlap (Jaccard over word tokens).
    static double overlap_score(const std::string& query, const std::string& document);

protected:
    std::string complete(const Request& request, const std::string& prompt) override;
    std::vector<double> score(const std::string& query, const std::vector<std::string>& documents) override;
};

} // namespace lw
