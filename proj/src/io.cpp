#include "deepbnd/io.hpp"

#include <bit>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "binary artifact format assumes a little-endian host");

namespace deepbnd::io {

void write_f64(const std::filesystem::path& p, const double* data, std::size_t count) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(double)));
    if (!out) throw std::runtime_error("short write " + p.string());
}

std::vector<double> read_f64(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary | std::ios::ate);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    auto bytes = static_cast<std::size_t>(in.tellg());
    if (bytes % sizeof(double) != 0)
        throw std::runtime_error(p.string() + ": size not a multiple of 8 bytes");
    std::vector<double> v(bytes / sizeof(double));
    in.seekg(0);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(bytes));
    if (!in) throw std::runtime_error("short read " + p.string());
    return v;
}

std::vector<double> read_f64_exact(const std::filesystem::path& p, std::size_t expect) {
    auto v = read_f64(p);
    if (v.size() != expect)
        throw std::runtime_error(p.string() + ": expected " + std::to_string(expect) +
                                 " float64 values, found " + std::to_string(v.size()));
    return v;
}

void write_matrix_rowmajor(const std::filesystem::path& p, const Eigen::MatrixXd& m) {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
    write_f64(p, rm.data(), static_cast<std::size_t>(rm.size()));
}

Eigen::MatrixXd read_matrix_rowmajor(const std::filesystem::path& p, Eigen::Index rows, Eigen::Index cols) {
    auto v = read_f64_exact(p, static_cast<std::size_t>(rows * cols));
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> map(v.data(), rows, cols);
    return map;
}

void write_matrix_colmajor(const std::filesystem::path& p, const Eigen::MatrixXd& m) {
    write_f64(p, m.data(), static_cast<std::size_t>(m.size()));
}

Eigen::MatrixXd read_matrix_colmajor(const std::filesystem::path& p, Eigen::Index rows, Eigen::Index cols) {
    auto v = read_f64_exact(p, static_cast<std::size_t>(rows * cols));
    return Eigen::Map<Eigen::MatrixXd>(v.data(), rows, cols);
}

void write_json(const std::filesystem::path& p, const json& j) {
    std::ofstream out(p, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << j.dump(2) << "\n";
}

json read_json(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    json j;
    in >> j;
    return j;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << text;
}

struct CsvWriter::Impl {
    std::ofstream out;
};

CsvWriter::CsvWriter(const std::filesystem::path& p) : impl_(new Impl) {
    impl_->out.open(p, std::ios::trunc);
    if (!impl_->out) throw std::runtime_error("cannot write " + p.string());
    impl_->out << "case,metric,value\n";
}

CsvWriter::~CsvWriter() { delete impl_; }

void CsvWriter::row(const std::string& case_name, const std::string& metric, double value) {
    impl_->out << case_name << ',' << metric << ',' << std::setprecision(17) << value << '\n';
}

} // namespace deepbnd::io
