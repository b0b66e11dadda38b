#include "lmc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "lmc/hash.hpp"

namespace lmc {

DatasetSlice DatasetSlice::classification(std::vector<double> inputs,
                                          size_t input_dim, std::vector<int> labels,
                                          int num_classes) {
    if (input_dim == 0 || inputs.empty())
        throw ConfigError("dataset inputs must be nonempty");
    if (inputs.size() % input_dim != 0)
        throw ConfigError("inputs size not a multiple of input_dim");
    DatasetSlice d;
    d.n_ = inputs.size() / input_dim;
    if (labels.size() != d.n_)
        throw ConfigError("inputs and labels must have equal length");
    for (int l : labels)
        if (l < 0 || l >= num_classes) throw ConfigError("label out of range");
    d.input_dim_ = input_dim;
    d.inputs_ = std::move(inputs);
    d.labels_ = std::move(labels);
    d.num_classes_ = num_classes;
    d.compute_id();
    return d;
}

DatasetSlice DatasetSlice::regression(std::vector<double> inputs, size_t input_dim,
                                      std::vector<double> targets,
                                      size_t target_dim) {
    if (input_dim == 0 || inputs.empty())
        throw ConfigError("dataset inputs must be nonempty");
    if (inputs.size() % input_dim != 0)
        throw ConfigError("inputs size not a multiple of input_dim");
    DatasetSlice d;
    d.n_ = inputs.size() / input_dim;
    if (target_dim == 0 || targets.size() != d.n_ * target_dim)
        throw ConfigError("inputs and targets must have equal length");
    d.input_dim_ = input_dim;
    d.inputs_ = std::move(inputs);
    d.targets_ = std::move(targets);
    d.target_dim_ = target_dim;
    d.compute_id();
    return d;
}

void DatasetSlice::compute_id() {
    Fnv1a h;
    h.update_pod(n_);
    h.update_pod(input_dim_);
    h.update_pod(target_dim_);
    h.update_pod(num_classes_);
    if (!inputs_.empty()) h.update(inputs_.data(), inputs_.size() * sizeof(double));
    if (!labels_.empty()) h.update(labels_.data(), labels_.size() * sizeof(int));
    if (!targets_.empty()) h.update(targets_.data(), targets_.size() * sizeof(double));
    id_ = h.digest();
}

DatasetSlice make_two_gaussians(size_t n, uint64_t seed, double separation) {
    std::mt19937_64 rng(mix_seed(seed, 0));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> inputs;
    std::vector<int> labels;
    inputs.reserve(n * 2);
    labels.reserve(n);
    double half = separation / 2.0;
    for (size_t i = 0; i < n; ++i) {
        int c = static_cast<int>(i % 2);
        double cx = c == 0 ? -half : half;
        inputs.push_back(cx + gauss(rng));
        inputs.push_back(gauss(rng));
        labels.push_back(c);
    }
    return DatasetSlice::classification(std::move(inputs), 2, std::move(labels), 2);
}

DatasetSlice make_spiral(size_t n, int classes, uint64_t seed, double noise) {
    if (classes < 2) throw ConfigError("spiral needs at least 2 classes");
    std::mt19937_64 rng(mix_seed(seed, 0));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> inputs;
    std::vector<int> labels;
    inputs.reserve(n * 2);
    labels.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        int c = static_cast<int>(i % static_cast<size_t>(classes));
        double t = static_cast<double>(i / classes) /
                   std::max<double>(1.0, std::ceil(double(n) / classes) - 1);
        double r = 0.2 + 0.8 * t;
        double phi = 2.0 * std::numbers::pi * (double(c) / classes) +
                     3.0 * t;  // 3 radians of twist per arm
        inputs.push_back(r * std::cos(phi) + noise * gauss(rng));
        inputs.push_back(r * std::sin(phi) + noise * gauss(rng));
        labels.push_back(c);
    }
    return DatasetSlice::classification(std::move(inputs), 2, std::move(labels),
                                        classes);
}

namespace {

uint32_t read_u32_be(std::istream& in, long& offset) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw ParseError("unexpected end of IDX file", offset);
    offset += 4;
    return (uint32_t(b[0]) << 24) | (uint32_t(b[1]) << 16) | (uint32_t(b[2]) << 8) |
           uint32_t(b[3]);
}

}  // namespace

DatasetSlice load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw ParseError("cannot open IDX image file " + images_path, 0);
    long off = 0;
    uint32_t magic = read_u32_be(img, off);
    if (magic != 0x00000803)
        throw ParseError("bad IDX image magic", off - 4);
    uint32_t count = read_u32_be(img, off);
    uint32_t rows = read_u32_be(img, off);
    uint32_t cols = read_u32_be(img, off);
    size_t pixels = size_t(count) * rows * cols;
    std::vector<unsigned char> raw(pixels);
    img.read(reinterpret_cast<char*>(raw.data()), std::streamsize(pixels));
    if (size_t(img.gcount()) != pixels)
        throw ParseError("IDX image payload truncated", off + long(img.gcount()));

    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw ParseError("cannot open IDX label file " + labels_path, 0);
    long loff = 0;
    uint32_t lmagic = read_u32_be(lab, loff);
    if (lmagic != 0x00000801)
        throw ParseError("bad IDX label magic", loff - 4);
    uint32_t lcount = read_u32_be(lab, loff);
    if (lcount != count) throw ParseError("IDX image/label count mismatch", loff);
    std::vector<unsigned char> lraw(lcount);
    lab.read(reinterpret_cast<char*>(lraw.data()), std::streamsize(lcount));
    if (size_t(lab.gcount()) != lcount)
        throw ParseError("IDX label payload truncated", loff + long(lab.gcount()));

    std::vector<double> inputs(pixels);
    for (size_t i = 0; i < pixels; ++i) inputs[i] = raw[i] / 255.0;
    std::vector<int> labels(lraw.begin(), lraw.end());
    int classes = 1 + *std::max_element(labels.begin(), labels.end());
    return DatasetSlice::classification(std::move(inputs), size_t(rows) * cols,
                                        std::move(labels), std::max(classes, 2));
}

DatasetSlice stratified_subset(const DatasetSlice& source, size_t subset_size,
                               uint64_t seed) {
    if (!source.is_classification())
        throw ConfigError("stratified subset requires a classification source");
    if (subset_size > source.size())
        throw BoundsError("subset larger than source");
    int k = source.num_classes();
    if (subset_size % size_t(k) != 0)
        throw ConfigError("subset size must be divisible by class count");
    size_t per_class = subset_size / size_t(k);

    std::map<int, std::vector<size_t>> by_class;
    for (size_t i = 0; i < source.size(); ++i) by_class[source.label(i)].push_back(i);

    std::vector<size_t> picked;
    picked.reserve(subset_size);
    for (int c = 0; c < k; ++c) {
        auto& idx = by_class[c];
        if (idx.size() < per_class)
            throw BoundsError("class " + std::to_string(c) + " has only " +
                              std::to_string(idx.size()) + " examples");
        std::mt19937_64 rng(mix_seed(seed, uint64_t(c)));
        std::shuffle(idx.begin(), idx.end(), rng);
        picked.insert(picked.end(), idx.begin(), idx.begin() + long(per_class));
    }
    std::sort(picked.begin(), picked.end());

    std::vector<double> inputs;
    std::vector<int> labels;
    inputs.reserve(picked.size() * source.input_dim());
    for (size_t i : picked) {
        const double* x = source.input(i);
        inputs.insert(inputs.end(), x, x + source.input_dim());
        labels.push_back(source.label(i));
    }
    return DatasetSlice::classification(std::move(inputs), source.input_dim(),
                                        std::move(labels), k);
}

namespace {

std::map<std::string, std::string> parse_kv(const std::string& s) {
    std::map<std::string, std::string> kv;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto eq = item.find('=');
        if (eq == std::string::npos)
            throw ConfigError("bad dataset descriptor field '" + item + "'");
        kv[item.substr(0, eq)] = item.substr(eq + 1);
    }
    return kv;
}

}  // namespace

DatasetSlice load_dataset(const std::string& descriptor) {
    auto colon = descriptor.find(':');
    std::string kind = descriptor.substr(0, colon);
    auto kv = colon == std::string::npos
                  ? std::map<std::string, std::string>{}
                  : parse_kv(descriptor.substr(colon + 1));
    auto get = [&](const std::string& key, const std::string& dflt) {
        auto it = kv.find(key);
        return it == kv.end() ? dflt : it->second;
    };

    DatasetSlice d = [&] {
        if (kind == "two_gaussians") {
            return make_two_gaussians(std::stoul(get("n", "100")),
                                      std::stoull(get("seed", "0")),
                                      std::stod(get("separation", "3.0")));
        } else if (kind == "spiral") {
            return make_spiral(std::stoul(get("n", "100")),
                               std::stoi(get("classes", "3")),
                               std::stoull(get("seed", "0")),
                               std::stod(get("noise", "0.2")));
        } else if (kind == "idx") {
            return load_idx(get("images", ""), get("labels", ""));
        }
        throw ConfigError("unknown dataset kind '" + kind + "'");
    }();

    if (kv.count("subset")) {
        d = stratified_subset(d, std::stoul(kv.at("subset")),
                              std::stoull(get("subset_seed", "0")));
    }
    return d;
}

}  // namespace lmc
