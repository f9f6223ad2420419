#include "rpnet/model.hpp"

#include <fstream>
#include <sstream>

#include "rpnet/errors.hpp"

namespace rpnet {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<int> parse_ints(const std::string& value, const std::string& where) {
    std::istringstream in(value);
    std::vector<int> out;
    int v = 0;
    while (in >> v) out.push_back(v);
    std::string rest;
    if (!in.eof() || (in >> rest)) throw DataError(where + ": expected integers, got '" + value + "'");
    if (out.empty()) throw DataError(where + ": empty value");
    return out;
}

ConvSpec parse_conv(const std::string& value, const std::string& where) {
    auto ints = parse_ints(value, where);
    if (ints.size() != 3)
        throw DataError(where + ": conv spec needs 'channels kernel dilation', got '" + value + "'");
    return ConvSpec{ints[0], ints[1], ints[2]};
}

int parse_one_int(const std::string& value, const std::string& where) {
    auto ints = parse_ints(value, where);
    if (ints.size() != 1) throw DataError(where + ": expected a single integer, got '" + value + "'");
    return ints[0];
}

} // namespace

ModelConfig load_model_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open model config: " + path);
    ModelConfig cfg;
    bool trunk_seen = false, mask_seen = false;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string where = path + ":" + std::to_string(line_no);
        std::string text = trim(line);
        if (text.empty() || text[0] == '#') continue;
        std::size_t eq = text.find('=');
        if (eq == std::string::npos) throw DataError(where + ": expected 'key = value'");
        std::string key = trim(text.substr(0, eq));
        std::string value = trim(text.substr(eq + 1));
        if (key == "width") {
            cfg.width = parse_one_int(value, where);
        } else if (key == "height") {
            cfg.height = parse_one_int(value, where);
        } else if (key == "trunk") {
            cfg.trunk_channels = parse_ints(value, where);
            trunk_seen = true;
        } else if (key == "mask_conv") {
            if (!mask_seen) cfg.mask_branch.clear(); // first line replaces the default stack
            mask_seen = true;
            cfg.mask_branch.push_back(parse_conv(value, where));
        } else if (key == "reg_conv1") {
            cfg.reg_conv1 = parse_conv(value, where);
        } else if (key == "reg_conv2") {
            cfg.reg_conv2 = parse_conv(value, where);
        } else if (key == "reg_pool") {
            cfg.reg_pool = parse_one_int(value, where);
        } else if (key == "branch_fc") {
            cfg.branch_fc = parse_one_int(value, where);
        } else if (key == "skip_pool") {
            cfg.skip_pool = parse_one_int(value, where);
        } else if (key == "fuse_fc") {
            cfg.fuse_fc = parse_one_int(value, where);
        } else {
            throw DataError(where + ": unknown key '" + key + "'");
        }
    }
    (void)trunk_seen;
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw DataError("invalid model config " + path + ": " + e.what());
    }
    return cfg;
}

void save_model_config(const ModelConfig& config, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write model config: " + path);
    out << "width = " << config.width << "\n";
    out << "height = " << config.height << "\n";
    out << "trunk =";
    for (int c : config.trunk_channels) out << " " << c;
    out << "\n";
    for (const auto& c : config.mask_branch)
        out << "mask_conv = " << c.channels << " " << c.kernel << " " << c.dilation << "\n";
    out << "reg_conv1 = " << config.reg_conv1.channels << " " << config.reg_conv1.kernel << " "
        << config.reg_conv1.dilation << "\n";
    out << "reg_conv2 = " << config.reg_conv2.channels << " " << config.reg_conv2.kernel << " "
        << config.reg_conv2.dilation << "\n";
    out << "reg_pool = " << config.reg_pool << "\n";
    out << "branch_fc = " << config.branch_fc << "\n";
    out << "skip_pool = " << config.skip_pool << "\n";
    out << "fuse_fc = " << config.fuse_fc << "\n";
    if (!out) throw DataError("failed writing model config: " + path);
}

} // namespace rpnet
