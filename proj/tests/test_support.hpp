#pragma once

#include <filesystem>
#include <string>

#include <unistd.h>

#include "tcmm/linalg.hpp"
#include "tcmm/rng.hpp"

namespace tcmm::testing {

inline FeatureVec random_unit(Rng& rng, std::size_t dim) {
    FeatureVec v(dim);
    for (auto& x : v) x = rng.normal();
    return l2_normalize(v);
}

inline Matrix random_unit_rows(Rng& rng, std::size_t rows, std::size_t dim) {
    Matrix m(rows, dim);
    for (std::size_t r = 0; r < rows; ++r) {
        const auto v = random_unit(rng, dim);
        std::copy(v.begin(), v.end(), m.row(r).begin());
    }
    return m;
}

inline Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t cols = rows.begin()->size();
    Matrix m(rows.size(), cols);
    std::size_t r = 0;
    for (const auto& row : rows) {
        std::size_t c = 0;
        for (double x : row) m(r, c++) = x;
        ++r;
    }
    return m;
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("tcmm_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace tcmm::testing
