#include "trigflow/config.hpp"

#include "trigflow/trigflow.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace trigflow {

namespace {
std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    size_t b = s.find_last_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoi(trim(item)));
    return out;
}

bool parse_bool(const std::string& s) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw std::invalid_argument("config: bad boolean '" + s + "'");
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}
} // namespace

NetConfig RunConfig::net_config(int input_dim) const {
    NetConfig nc;
    nc.input_dim = input_dim;
    nc.hidden = hidden;
    nc.time_embed_pairs = time_embed_pairs;
    nc.fourier_scale = fourier_scale;
    nc.legacy_cnoise = legacy_cnoise;
    nc.attention = attention;
    nc.tokens = tokens;
    return nc;
}

std::string RunConfig::canonical() const {
    std::ostringstream os;
    os << "dataset=" << dataset << "\n";
    os << "data.std=" << fmt(data_std) << "\n";
    os << "data.dim=" << data_dim << "\n";
    os << "data.n_train=" << n_train << "\n";
    os << "net.hidden=";
    for (size_t i = 0; i < hidden.size(); ++i) os << (i ? "," : "") << hidden[i];
    os << "\n";
    os << "net.time_embed_pairs=" << time_embed_pairs << "\n";
    os << "net.fourier_scale=" << fmt(fourier_scale) << "\n";
    os << "net.legacy_cnoise=" << (legacy_cnoise ? "true" : "false") << "\n";
    os << "net.attention=" << (attention ? "true" : "false") << "\n";
    os << "net.tokens=" << tokens << "\n";
    os << "proposal.p_mean=" << fmt(p_mean) << "\n";
    os << "proposal.p_std=" << fmt(p_std) << "\n";
    os << "train.mode=" << mode << "\n";
    os << "train.iters=" << iters << "\n";
    os << "train.batch=" << batch << "\n";
    os << "train.lr=" << fmt(lr) << "\n";
    os << "train.wphi_lr=" << fmt(wphi_lr) << "\n";
    os << "train.adam_beta1=" << fmt(adam_beta1) << "\n";
    os << "train.adam_beta2=" << fmt(adam_beta2) << "\n";
    os << "train.adam_eps=" << fmt(adam_eps) << "\n";
    os << "train.ema_decay=" << fmt(ema_decay) << "\n";
    os << "train.tangent_c=" << fmt(tangent_c) << "\n";
    os << "train.tangent_mode=" << tangent_mode << "\n";
    os << "train.warmup_iters=" << warmup_iters << "\n";
    os << "train.dscd_n=" << dscd_n << "\n";
    os << "teacher.ckpt=" << teacher_ckpt << "\n";
    os << "vsd.lambda=" << fmt(vsd_lambda) << "\n";
    os << "vsd.p_mean=" << fmt(vsd_p_mean) << "\n";
    os << "vsd.p_std=" << fmt(vsd_p_std) << "\n";
    os << "sample.method=" << sample_method << "\n";
    os << "sample.steps=" << sample_steps << "\n";
    os << "sample.sigma_max=" << fmt(sigma_max) << "\n";
    os << "sample.t_mid=" << fmt(t_mid) << "\n";
    os << "sample.n=" << sample_n << "\n";
    os << "eval.interval=" << eval_interval << "\n";
    os << "eval.samples=" << eval_samples << "\n";
    os << "seed=" << seed << "\n";
    os << "out=" << out_dir << "\n";
    return os.str();
}

void RunConfig::apply(const std::string& key, const std::string& value) {
    if (key == "dataset") dataset = value;
    else if (key == "data.std") data_std = std::stod(value);
    else if (key == "data.dim") data_dim = std::stoi(value);
    else if (key == "data.n_train") n_train = std::stoi(value);
    else if (key == "net.hidden") hidden = parse_int_list(value);
    else if (key == "net.time_embed_pairs") time_embed_pairs = std::stoi(value);
    else if (key == "net.fourier_scale") fourier_scale = std::stod(value);
    else if (key == "net.legacy_cnoise") legacy_cnoise = parse_bool(value);
    else if (key == "net.attention") attention = parse_bool(value);
    else if (key == "net.tokens") tokens = std::stoi(value);
    else if (key == "proposal.p_mean") p_mean = std::stod(value);
    else if (key == "proposal.p_std") p_std = std::stod(value);
    else if (key == "train.mode") mode = value;
    else if (key == "train.iters") iters = std::stol(value);
    else if (key == "train.batch") batch = std::stoi(value);
    else if (key == "train.lr") lr = std::stod(value);
    else if (key == "train.wphi_lr") wphi_lr = std::stod(value);
    else if (key == "train.adam_beta1") adam_beta1 = std::stod(value);
    else if (key == "train.adam_beta2") adam_beta2 = std::stod(value);
    else if (key == "train.adam_eps") adam_eps = std::stod(value);
    else if (key == "train.ema_decay") ema_decay = std::stod(value);
    else if (key == "train.tangent_c") tangent_c = std::stod(value);
    else if (key == "train.tangent_mode") tangent_mode = value;
    else if (key == "train.warmup_iters") warmup_iters = std::stol(value);
    else if (key == "train.dscd_n") dscd_n = std::stoi(value);
    else if (key == "teacher.ckpt") teacher_ckpt = value;
    else if (key == "vsd.lambda") vsd_lambda = std::stod(value);
    else if (key == "vsd.p_mean") vsd_p_mean = std::stod(value);
    else if (key == "vsd.p_std") vsd_p_std = std::stod(value);
    else if (key == "sample.method") sample_method = value;
    else if (key == "sample.steps") sample_steps = std::stoi(value);
    else if (key == "sample.sigma_max") sigma_max = std::stod(value);
    else if (key == "sample.t_mid") t_mid = std::stod(value);
    else if (key == "sample.n") sample_n = std::stoi(value);
    else if (key == "eval.interval") eval_interval = std::stol(value);
    else if (key == "eval.samples") eval_samples = std::stoi(value);
    else if (key == "seed") seed = std::stoull(value);
    else if (key == "out") out_dir = value;
    else throw std::invalid_argument("config: unknown key '" + key + "'");
}

RunConfig RunConfig::from_text(const std::string& text) {
    RunConfig cfg;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: line " + std::to_string(lineno) + " has no '='");
        cfg.apply(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    cfg.validate();
    return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("config: cannot open " + path);
    std::stringstream buf;
    buf << is.rdbuf();
    return from_text(buf.str());
}

void RunConfig::validate() const {
    if (p_std <= 0.0 || vsd_p_std <= 0.0) throw std::invalid_argument("config: proposal std must be > 0");
    if (batch < 1 || iters < 0) throw std::invalid_argument("config: bad batch/iters");
    if (hidden.empty()) throw std::invalid_argument("config: net.hidden empty");
    if (tangent_mode != "normalize" && tangent_mode != "clip" && tangent_mode != "raw")
        throw std::invalid_argument("config: bad tangent_mode " + tangent_mode);
    if (mode != "diffusion" && mode != "sct" && mode != "scd" && mode != "dscd" && mode != "vsd" &&
        mode != "scd-vsd")
        throw std::invalid_argument("config: bad train.mode " + mode);
    if (dscd_n < 2) throw std::invalid_argument("config: train.dscd_n must be >= 2");
    if (sample_steps < 1) throw std::invalid_argument("config: sample.steps must be >= 1");
    if (t_mid < 0.0 || t_mid > kHalfPi) throw std::invalid_argument("config: sample.t_mid outside [0, pi/2]");
}

} // namespace trigflow
