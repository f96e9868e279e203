#include <cmath>
#include <fstream>

#include <json.hpp>

#include "scbench/alignment.hpp"
#include "scbench/error.hpp"

namespace scbench {
namespace {

constexpr int kCheckpointVersion = 1;

nlohmann::json dims_json(const AlignmentDims &d) {
    return {{"d_a", d.d_a}, {"d_r", d.d_r}, {"d_h", d.d_h}, {"d_h_in", d.d_h_in}, {"n_classes", d.n_classes}};
}

} // namespace

void save_checkpoint(const AlignmentCheckpoint &checkpoint, const std::filesystem::path &file) {
    const auto &model = checkpoint.model;
    if (checkpoint.atac_features.size() != model.dims.d_a || checkpoint.rna_features.size() != model.dims.d_r)
        throw InvalidArgument("checkpoint feature names do not match the model dimensions");
    nlohmann::json params = nlohmann::json::object();
    model.visit([&](const std::string &name, const MatrixXd &m, bool) {
        // Column-major, like Eigen's storage.
        params[name] = {{"rows", m.rows()}, {"cols", m.cols()},
                        {"data", std::vector<double>(m.data(), m.data() + m.size())}};
    });
    nlohmann::json doc{
        {"version", kCheckpointVersion},
        {"dims", dims_json(model.dims)},
        {"gamma", model.gamma},
        {"params", std::move(params)},
        {"atac_features", checkpoint.atac_features},
        {"rna_features", checkpoint.rna_features},
    };
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint " + file.string());
    out << doc.dump() << '\n';
    if (!out) throw Error("failed writing checkpoint " + file.string());
}

AlignmentCheckpoint load_checkpoint(const std::filesystem::path &file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error("cannot read checkpoint " + file.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception &e) {
        throw FormatError(file.string(), 1, std::string("checkpoint is not JSON: ") + e.what());
    }
    try {
        if (doc.at("version").get<int>() != kCheckpointVersion)
            throw FormatError(file.string(), 1, "unsupported checkpoint version");
        AlignmentDims dims;
        const auto &d = doc.at("dims");
        dims.d_a = d.at("d_a").get<std::size_t>();
        dims.d_r = d.at("d_r").get<std::size_t>();
        dims.d_h = d.at("d_h").get<std::size_t>();
        dims.d_h_in = d.at("d_h_in").get<std::size_t>();
        dims.n_classes = d.at("n_classes").get<std::size_t>();

        AlignmentCheckpoint ck;
        ck.model = init_model(dims, doc.at("gamma").get<double>(), 0);
        const auto &params = doc.at("params");
        ck.model.visit([&](const std::string &name, MatrixXd &m, bool) {
            const auto &block = params.at(name);
            if (block.at("rows").get<Eigen::Index>() != m.rows() || block.at("cols").get<Eigen::Index>() != m.cols())
                throw FormatError(file.string(), 1, "parameter block " + name + " has the wrong shape");
            const auto data = block.at("data").get<std::vector<double>>();
            if (static_cast<Eigen::Index>(data.size()) != m.size())
                throw FormatError(file.string(), 1, "parameter block " + name + " has the wrong length");
            for (double v : data) {
                if (!std::isfinite(v)) throw FormatError(file.string(), 1, "parameter block " + name + " is not finite");
            }
            std::copy(data.begin(), data.end(), m.data());
        });
        ck.atac_features = doc.at("atac_features").get<std::vector<std::string>>();
        ck.rna_features = doc.at("rna_features").get<std::vector<std::string>>();
        if (ck.atac_features.size() != dims.d_a || ck.rna_features.size() != dims.d_r)
            throw FormatError(file.string(), 1, "feature names do not match the dimensions");
        return ck;
    } catch (const nlohmann::json::exception &e) {
        throw FormatError(file.string(), 1, std::string("malformed checkpoint: ") + e.what());
    }
}

} // namespace scbench
