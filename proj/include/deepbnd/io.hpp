#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace deepbnd::io {

using json = nlohmann::json;

// All binary artifacts are raw little-endian float64; row- vs column-major
// is fixed per artifact kind and recorded in the JSON sidecar.
void write_f64(const std::filesystem::path& p, const double* data, std::size_t count);
std::vector<double> read_f64(const std::filesystem::path& p);
std::vector<double> read_f64_exact(const std::filesystem::path& p, std::size_t expect);

// row-major on disk
void write_matrix_rowmajor(const std::filesystem::path& p, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_rowmajor(const std::filesystem::path& p, Eigen::Index rows, Eigen::Index cols);

// column-major on disk
void write_matrix_colmajor(const std::filesystem::path& p, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_colmajor(const std::filesystem::path& p, Eigen::Index rows, Eigen::Index cols);

void write_json(const std::filesystem::path& p, const json& j);
json read_json(const std::filesystem::path& p);

void write_text(const std::filesystem::path& p, const std::string& text);

struct CsvWriter {
    explicit CsvWriter(const std::filesystem::path& p);
    ~CsvWriter();
    void row(const std::string& case_name, const std::string& metric, double value);

private:
    struct Impl;
    Impl* impl_;
};

} // namespace deepbnd::io
