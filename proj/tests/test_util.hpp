#pragma once

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <unistd.h>

#include <gtest/gtest.h>

#include "agenteval/ingestion.hpp"
#include "agenteval/orchestrator.hpp"

namespace agenteval::testing {

namespace fs = std::filesystem;

inline fs::path fixtures_dir() { return AGENTEVAL_FIXTURES_DIR; }
inline fs::path golden_dir() { return AGENTEVAL_GOLDEN_DIR; }
inline fs::path fixture(const std::string& name) { return fixtures_dir() / name; }

inline std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Compares against tests/golden/<name>. AGENTEVAL_UPDATE_GOLDEN=1 rewrites
// the file instead.
inline void expect_golden(const std::string& name, const std::string& actual) {
    const auto path = golden_dir() / name;
    if (const char* update = std::getenv("AGENTEVAL_UPDATE_GOLDEN"); update && std::string(update) == "1") {
        std::ofstream(path, std::ios::binary) << actual;
        return;
    }
    ASSERT_TRUE(fs::exists(path)) << "missing golden file " << path;
    EXPECT_EQ(slurp(path), actual) << "golden mismatch: " << name;
}

// Fresh directory removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = fs::temp_directory_path() /
                ("agenteval-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

inline std::vector<EvaluationSample> demo_samples() {
    return load_samples_file(fixture("demo.jsonl").string(), ParseMode::kStrict, default_task_registry()).samples;
}

inline RunSpec demo_spec() { return RunSpec::load(fixture("demo_run.json")); }

// The demo run, executed in memory against its scripted fixtures.
inline RunRecord demo_run() {
    const auto spec = demo_spec();
    auto backend = make_backend(ModelConfig::load(spec.model_config_ref));
    return run_pipeline(spec, demo_samples(), EvaluationConfig{}, TemplateRegistry::defaults(), *backend);
}

// Seeds are fixed so failures reproduce; AGENTEVAL_TEST_SEED overrides.
inline std::uint64_t test_seed(std::uint64_t fallback) {
    if (const char* s = std::getenv("AGENTEVAL_TEST_SEED"); s && *s) return std::strtoull(s, nullptr, 10);
    return fallback;
}

}  // namespace agenteval::testing
