#include "lsq/problem.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace lsq {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

struct MmReader {
    std::ifstream in;
    std::string path;
    long long line_no = 0;

    explicit MmReader(const std::string& p) : in(p), path(p) {
        if (!in) throw ParseError("cannot open Matrix Market file: " + p);
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw ParseError(path + ":" + std::to_string(line_no) + ": " + what);
    }

    // Next line that is neither blank nor a '%' comment.
    bool next_data_line(std::string& out) {
        std::string line;
        while (std::getline(in, line)) {
            ++line_no;
            auto first = line.find_first_not_of(" \t\r");
            if (first == std::string::npos) continue;
            if (line[first] == '%') continue;
            out = line;
            return true;
        }
        return false;
    }
};

MatrixMarketInfo parse_header(MmReader& r) {
    std::string banner;
    if (!std::getline(r.in, banner)) r.fail("empty file");
    r.line_no = 1;

    std::istringstream bs(banner);
    std::string tag, object, format, field, symmetry;
    bs >> tag >> object >> format >> field >> symmetry;
    if (lower(tag) != "%%matrixmarket") r.fail("missing %%MatrixMarket banner");
    if (lower(object) != "matrix") r.fail("unsupported object type: " + object);

    MatrixMarketInfo info;
    const std::string fmt = lower(format);
    if (fmt == "coordinate")
        info.format = MatrixMarketInfo::Format::Coordinate;
    else if (fmt == "array")
        info.format = MatrixMarketInfo::Format::Array;
    else
        r.fail("unknown format: " + format);

    const std::string fld = lower(field);
    if (fld == "real" || fld == "double")
        info.field = MatrixMarketInfo::Field::Real;
    else if (fld == "integer")
        info.field = MatrixMarketInfo::Field::Integer;
    else if (fld == "pattern")
        info.field = MatrixMarketInfo::Field::Pattern;
    else if (fld == "complex")
        info.field = MatrixMarketInfo::Field::Complex;
    else
        r.fail("unknown field: " + field);

    const std::string sym = lower(symmetry);
    if (sym == "general")
        info.symmetry = MatrixMarketInfo::Symmetry::General;
    else if (sym == "symmetric")
        info.symmetry = MatrixMarketInfo::Symmetry::Symmetric;
    else if (sym == "skew-symmetric")
        info.symmetry = MatrixMarketInfo::Symmetry::SkewSymmetric;
    else if (sym == "hermitian")
        info.symmetry = MatrixMarketInfo::Symmetry::Hermitian;
    else
        r.fail("unknown symmetry: " + symmetry);

    std::string size_line;
    if (!r.next_data_line(size_line)) r.fail("missing size line");
    std::istringstream ss(size_line);
    if (info.format == MatrixMarketInfo::Format::Coordinate) {
        if (!(ss >> info.rows >> info.cols >> info.entries))
            r.fail("bad coordinate size line: " + size_line);
    } else {
        if (!(ss >> info.rows >> info.cols)) r.fail("bad array size line: " + size_line);
        info.entries = static_cast<long long>(info.rows) * info.cols;
    }
    if (info.rows <= 0 || info.cols <= 0) r.fail("non-positive dimensions");
    return info;
}

void check_supported(const MatrixMarketInfo& info, MmReader& r) {
    if (info.field == MatrixMarketInfo::Field::Complex ||
        info.symmetry == MatrixMarketInfo::Symmetry::Hermitian)
        throw ComplexFieldError(r.path + ": complex-valued matrices are not supported");
    if (info.format == MatrixMarketInfo::Format::Array &&
        info.field == MatrixMarketInfo::Field::Pattern)
        r.fail("array format cannot carry a pattern field");
    if (info.symmetry != MatrixMarketInfo::Symmetry::General && info.rows != info.cols)
        r.fail("symmetric storage requires a square matrix");
}

Matrix load_coordinate(const MatrixMarketInfo& info, MmReader& r) {
    Matrix A = Matrix::Zero(info.rows, info.cols);
    const bool pattern = info.field == MatrixMarketInfo::Field::Pattern;
    const bool skew = info.symmetry == MatrixMarketInfo::Symmetry::SkewSymmetric;
    const bool sym = info.symmetry == MatrixMarketInfo::Symmetry::Symmetric;

    std::string line;
    for (long long k = 0; k < info.entries; ++k) {
        if (!r.next_data_line(line)) r.fail("unexpected end of file: expected " +
                                            std::to_string(info.entries) + " entries");
        std::istringstream ls(line);
        Index i = 0, j = 0;
        double v = 1.0;
        if (!(ls >> i >> j)) r.fail("bad entry line: " + line);
        if (!pattern && !(ls >> v)) r.fail("missing value: " + line);
        if (i < 1 || i > info.rows || j < 1 || j > info.cols)
            r.fail("index out of range: " + line);
        A(i - 1, j - 1) += v;
        if ((sym || skew) && i != j) A(j - 1, i - 1) += skew ? -v : v;
    }
    return A;
}

Matrix load_array(const MatrixMarketInfo& info, MmReader& r) {
    Matrix A = Matrix::Zero(info.rows, info.cols);
    const bool sym = info.symmetry != MatrixMarketInfo::Symmetry::General;
    const bool skew = info.symmetry == MatrixMarketInfo::Symmetry::SkewSymmetric;

    // Array data is column-major; symmetric storage lists the lower
    // triangle (diagonal included, excluded for skew-symmetric).
    std::string line;
    std::istringstream ls;
    auto next_value = [&](double& v) {
        while (!(ls >> v)) {
            if (!r.next_data_line(line)) return false;
            ls.clear();
            ls.str(line);
        }
        return true;
    };

    for (Index j = 0; j < info.cols; ++j) {
        const Index i0 = sym ? (skew ? j + 1 : j) : 0;
        for (Index i = i0; i < info.rows; ++i) {
            double v = 0.0;
            if (!next_value(v)) r.fail("unexpected end of file in array data");
            A(i, j) = v;
            if (sym && i != j) A(j, i) = skew ? -v : v;
        }
    }
    return A;
}

}  // namespace

MatrixMarketInfo matrix_market_info(const std::string& path) {
    MmReader r(path);
    return parse_header(r);
}

Matrix load_matrix_market(const std::string& path) {
    MmReader r(path);
    MatrixMarketInfo info = parse_header(r);
    check_supported(info, r);
    Matrix A = info.format == MatrixMarketInfo::Format::Coordinate ? load_coordinate(info, r)
                                                                   : load_array(info, r);
    if (!all_finite(A)) throw ParseError(path + ": non-finite value in matrix data");
    return A;
}

}  // namespace lsq
