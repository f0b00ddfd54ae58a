#include "tpbs/model_io.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "binary_io.hpp"
#include "tpbs/error.hpp"

namespace tpbs {

namespace {

constexpr char kMagic[4] = {'T', 'P', 'B', 'S'};
constexpr const char* kTextTag = "TPBS-TEXT";
constexpr std::uint32_t kMaxCount = 1u << 26;

class TextWriter {
public:
    explicit TextWriter(std::ostream& os) : os_(os) { os_ << std::setprecision(17); }
    void u32(std::uint32_t v) { os_ << v << '\n'; }
    void f64(double v) { os_ << v << '\n'; }
    void f64s(const std::vector<double>& values) {
        for (double v : values) f64(v);
    }

private:
    std::ostream& os_;
};

class TextReader {
public:
    explicit TextReader(std::istream& is) : is_(is) {}

    std::string token() {
        std::string t;
        if (!(is_ >> t)) fail(ErrorKind::Truncated, "model text file ends before all fields were read");
        return t;
    }
    std::uint32_t u32() {
        const std::string t = token();
        char* end = nullptr;
        errno = 0;
        const unsigned long long v = std::strtoull(t.c_str(), &end, 10);
        if (end == t.c_str() || *end != '\0' || errno != 0 || v > 0xffffffffull)
            fail(ErrorKind::Parse, "model text file: expected unsigned integer, got '" + t + "'");
        return static_cast<std::uint32_t>(v);
    }
    double f64() {
        const std::string t = token();
        char* end = nullptr;
        const double v = std::strtod(t.c_str(), &end);
        if (end == t.c_str() || *end != '\0')
            fail(ErrorKind::Parse, "model text file: expected number, got '" + t + "'");
        return v;
    }
    std::vector<double> f64s(std::size_t n) {
        std::vector<double> out(n);
        for (auto& v : out) v = f64();
        return out;
    }
    std::uint32_t count(std::uint32_t limit, const char* field) {
        const std::uint32_t v = u32();
        if (v > limit)
            fail(ErrorKind::Dimension, std::string("model text file: field '") + field + "' too large");
        return v;
    }

private:
    std::istream& is_;
};

template <class Writer>
void write_fields(const TpbsModel& model, Writer& w) {
    w.u32(static_cast<std::uint32_t>(model.input_dim()));
    w.u32(static_cast<std::uint32_t>(model.rank()));
    w.u32(static_cast<std::uint32_t>(model.output_dim()));
    for (const auto& s : model.spaces()) {
        w.u32(static_cast<std::uint32_t>(s.degree));
        w.u32(static_cast<std::uint32_t>(s.num_basis));
        w.u32(static_cast<std::uint32_t>(s.knots.size()));
        w.f64s(s.knots);
    }
    w.f64s(model.coeffs());
    w.f64s(model.out_vectors());
    const ScalerParams& sc = model.scaler();
    w.u32(static_cast<std::uint32_t>(sc.dim()));
    w.f64s(sc.feature_min);
    w.f64s(sc.feature_max);
    w.f64(sc.margin);
    w.f64(sc.target_offset);
    w.f64(sc.target_scale);
}

template <class Reader>
TpbsModel read_fields(Reader& rd) {
    const std::uint32_t n_dim = rd.count(1u << 16, "N");
    const std::uint32_t rank = rd.count(1u << 20, "R");
    const std::uint32_t out_dim = rd.count(1u << 16, "M");
    require(n_dim >= 1 && rank >= 1 && out_dim >= 1, ErrorKind::Dimension,
            "model file: N, R and M must all be positive");
    std::vector<SplineSpace> spaces;
    for (std::uint32_t n = 0; n < n_dim; ++n) {
        SplineSpace s;
        s.degree = static_cast<int>(rd.count(15, "degree"));
        s.num_basis = static_cast<int>(rd.count(kMaxCount, "num_basis"));
        const std::uint32_t knot_count = rd.count(kMaxCount, "knot_count");
        if (knot_count != static_cast<std::uint32_t>(s.num_basis + s.degree + 1) || s.num_basis < s.degree + 1)
            fail(ErrorKind::Dimension, "model file: knot count inconsistent with degree and num_basis in dimension " +
                                           std::to_string(n));
        s.knots = rd.f64s(knot_count);
        s.quad_order = s.degree + 1;
        // Only open-uniform spaces are produced; anything else is corruption.
        if (!(s == build_space(s.num_basis, s.degree)))
            fail(ErrorKind::Dimension, "model file: knot vector of dimension " + std::to_string(n) +
                                           " is not the open-uniform vector implied by its header");
        spaces.push_back(std::move(s));
    }
    TpbsModel model(std::move(spaces), static_cast<int>(rank), static_cast<int>(out_dim));
    model.coeffs() = rd.f64s(model.coeffs().size());
    model.out_vectors() = rd.f64s(model.out_vectors().size());
    const std::uint32_t scaler_dim = rd.count(1u << 16, "scaler_dim");
    if (scaler_dim != 0 && scaler_dim != n_dim)
        fail(ErrorKind::Dimension, "model file: scaler dimension " + std::to_string(scaler_dim) +
                                       " differs from input dimension " + std::to_string(n_dim));
    ScalerParams& sc = model.scaler();
    sc.feature_min = rd.f64s(scaler_dim);
    sc.feature_max = rd.f64s(scaler_dim);
    sc.margin = rd.f64();
    sc.target_offset = rd.f64();
    sc.target_scale = rd.f64();
    return model;
}

}  // namespace

void save_model(const TpbsModel& model, std::ostream& os, FileMode mode) {
    if (mode == FileMode::Binary) {
        detail::LeWriter w(os);
        w.raw(kMagic, 4);
        w.u32(kModelFormatVersion);
        write_fields(model, w);
    } else {
        os << kTextTag << ' ' << kModelFormatVersion << '\n';
        TextWriter w(os);
        write_fields(model, w);
    }
    if (!os) fail(ErrorKind::Io, "failed while writing model");
}

void save_model(const TpbsModel& model, const std::string& path, FileMode mode) {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail(ErrorKind::Io, "cannot open '" + path + "' for writing");
    save_model(model, os, mode);
}

TpbsModel load_model(std::istream& is) {
    char head[5] = {};
    is.read(head, 4);
    if (is.gcount() != 4) fail(ErrorKind::Truncated, "model file shorter than its magic string");
    if (std::string(head, 4) != std::string(kMagic, 4))
        fail(ErrorKind::BadMagic, "bad magic: not a TPBS model file");
    if (is.peek() == '-') {
        std::string tag;
        is >> tag;
        if ("TPBS" + tag != kTextTag) fail(ErrorKind::BadMagic, "bad magic: unknown text tag 'TPBS" + tag + "'");
        TextReader rd(is);
        const std::uint32_t version = rd.u32();
        if (version != kModelFormatVersion)
            fail(ErrorKind::Version, "unsupported model format version " + std::to_string(version));
        return read_fields(rd);
    }
    detail::LeReader rd(is, "model file");
    const std::uint32_t version = rd.u32();
    if (version != kModelFormatVersion)
        fail(ErrorKind::Version, "unsupported model format version " + std::to_string(version));
    return read_fields(rd);
}

TpbsModel load_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail(ErrorKind::Io, "cannot open model file '" + path + "'");
    return load_model(is);
}

}  // namespace tpbs
