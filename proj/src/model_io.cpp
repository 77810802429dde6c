#include "pem/model_io.hpp"

#include <cstring>
#include <fstream>
#include <ostream>
#include <sstream>

namespace pem {

namespace {

constexpr char kMagic[8] = {'P', 'E', 'M', 'M', 'O', 'D', 'L', '1'};

void write_bytes(std::ostream& out, const void* data, std::size_t n) {
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

void write_u8(std::ostream& out, std::uint8_t v) { write_bytes(out, &v, 1); }

void write_u64(std::ostream& out, std::uint64_t v) {
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    write_bytes(out, buf, 8);
}

void write_f64(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    write_u64(out, bits);
}

void write_string(std::ostream& out, const std::string& s) {
    write_u64(out, s.size());
    write_bytes(out, s.data(), s.size());
}

void write_matrix(std::ostream& out, const Matrix& m) {
    write_u64(out, static_cast<std::uint64_t>(m.rows()));
    write_u64(out, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) write_f64(out, m(i, j));
}

void write_vector(std::ostream& out, const Vector& v) {
    write_u64(out, static_cast<std::uint64_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) write_f64(out, v(i));
}

void read_bytes(std::istream& in, void* data, std::size_t n) {
    in.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (in.gcount() != static_cast<std::streamsize>(n)) throw DataError("truncated model file");
}

std::uint8_t read_u8(std::istream& in) {
    std::uint8_t v;
    read_bytes(in, &v, 1);
    return v;
}

std::uint64_t read_u64(std::istream& in) {
    char buf[8];
    read_bytes(in, buf, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
    return v;
}

double read_f64(std::istream& in) {
    const std::uint64_t bits = read_u64(in);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

std::string read_string(std::istream& in) {
    const std::uint64_t n = read_u64(in);
    std::string s(n, '\0');
    read_bytes(in, s.data(), n);
    return s;
}

Matrix read_matrix(std::istream& in) {
    const std::uint64_t rows = read_u64(in);
    const std::uint64_t cols = read_u64(in);
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = read_f64(in);
    return m;
}

Vector read_vector(std::istream& in) {
    const std::uint64_t n = read_u64(in);
    Vector v(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = read_f64(in);
    return v;
}

TrainConfig parse_config_echo(const std::string& echo) {
    TrainConfig config;
    std::istringstream in(echo);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) throw DataError("malformed config echo line: " + line);
        config_set(config, line.substr(0, eq), line.substr(eq + 1));
    }
    return config;
}

}  // namespace

void save_model(const TrainedModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open model file for writing: " + path);

    write_bytes(out, kMagic, sizeof(kMagic));
    write_string(out, config_echo(model.config));

    write_u64(out, model.vocab.size());
    for (std::size_t id = 0; id < model.vocab.size(); ++id) {
        write_u8(out, static_cast<std::uint8_t>(model.vocab.kind(id)));
        write_string(out, model.vocab.surface(id));
        write_u64(out, model.vocab.count(id));
    }

    write_matrix(out, model.params.target);
    write_matrix(out, model.params.context);
    write_matrix(out, model.att2.W_K);
    write_matrix(out, model.att2.W_Q);

    write_u8(out, model.adversary ? 1 : 0);
    if (model.adversary) {
        write_matrix(out, model.adversary->att.W_K);
        write_matrix(out, model.adversary->att.W_Q);
        write_matrix(out, model.adversary->disc.W1);
        write_vector(out, model.adversary->disc.b1);
        write_vector(out, model.adversary->disc.W2);
        write_f64(out, model.adversary->disc.b2);
        write_f64(out, model.adversary->lambda);
    }

    write_u64(out, model.log.size());
    for (const LogRow& row : model.log) {
        write_u8(out, static_cast<std::uint8_t>(row.phase));
        write_u64(out, row.check_index);
        write_u64(out, row.batches_seen);
        write_f64(out, row.loss);
        write_f64(out, row.val_f1);
    }
    if (!out) throw DataError("failed writing model file: " + path);
}

TrainedModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model file: " + path);

    char magic[8];
    read_bytes(in, magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(magic)) != 0)
        throw DataError("not a model file (bad magic): " + path);

    TrainedModel model;
    model.config = parse_config_echo(read_string(in));

    const std::uint64_t vocab_size = read_u64(in);
    for (std::uint64_t id = 0; id < vocab_size; ++id) {
        const std::uint8_t kind = read_u8(in);
        if (kind > static_cast<std::uint8_t>(TokenKind::Word))
            throw DataError("corrupt model file: bad token kind");
        std::string surface = read_string(in);
        const std::uint64_t count = read_u64(in);
        model.vocab.append(std::move(surface), static_cast<TokenKind>(kind), count);
    }

    model.params.target = read_matrix(in);
    model.params.context = read_matrix(in);
    model.params.d = model.params.target.cols() - 1;
    model.att2.W_K = read_matrix(in);
    model.att2.W_Q = read_matrix(in);

    if (read_u8(in)) {
        AdversaryState adv;
        adv.att.W_K = read_matrix(in);
        adv.att.W_Q = read_matrix(in);
        adv.disc.W1 = read_matrix(in);
        adv.disc.b1 = read_vector(in);
        adv.disc.W2 = read_vector(in);
        adv.disc.b2 = read_f64(in);
        adv.lambda = read_f64(in);
        model.adversary = std::move(adv);
    }

    const std::uint64_t log_rows = read_u64(in);
    for (std::uint64_t i = 0; i < log_rows; ++i) {
        LogRow row;
        row.phase = static_cast<Phase>(read_u8(in));
        row.check_index = read_u64(in);
        row.batches_seen = read_u64(in);
        row.loss = read_f64(in);
        row.val_f1 = read_f64(in);
        model.log.push_back(row);
    }

    if (model.params.target.rows() != static_cast<Eigen::Index>(model.vocab.size()) ||
        model.params.context.rows() != model.params.target.rows() ||
        model.params.context.cols() != model.params.target.cols())
        throw DataError("corrupt model file: dimension mismatch");
    return model;
}

void write_training_log(const TrainedModel& model, std::ostream& out) {
    std::istringstream echo(config_echo(model.config));
    std::string line;
    while (std::getline(echo, line)) out << "# " << line << '\n';
    out << "phase\tcheck_index\tbatches_seen\tloss\tval_f1\n";
    for (const LogRow& row : model.log)
        out << phase_name(row.phase) << '\t' << row.check_index << '\t' << row.batches_seen
            << '\t' << format_double(row.loss) << '\t' << format_double(row.val_f1) << '\n';
}

void export_text(const TrainedModel& model, std::ostream& out) {
    out << model.vocab.size() << ' ' << model.params.dim() << '\n';
    for (std::size_t id = 0; id < model.vocab.size(); ++id) {
        std::string surface = model.vocab.surface(id);
        for (char& c : surface)
            if (c == ' ') c = '_';
        out << surface;
        for (Eigen::Index j = 0; j < model.params.dim(); ++j)
            out << ' ' << format_double(model.params.context(static_cast<Eigen::Index>(id), j));
        out << '\n';
    }
}

}  // namespace pem
