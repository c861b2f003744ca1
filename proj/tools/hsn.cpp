// Command-line entry points: precompute, train, eval, export-ply.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <random>
#include <sstream>
#include <tuple>

#include "hsn/binary_io.hpp"
#include "hsn/checkpoint.hpp"
#include "hsn/datasets.hpp"
#include "hsn/error.hpp"
#include "hsn/training.hpp"

namespace fs = std::filesystem;
using namespace hsn;

namespace {

struct Args {
  std::string mesh, dataset, cache, checkpoint, out, config;
  double epsilon = 0.2;
  int rings = 6;
  int levels = 2;
  std::vector<double> ratio = {0.25};
  std::vector<double> radii;
  std::string streams = "0,1";
  int epochs = 20;
  double lr = 0.01;
  double lr_decay = 1.0;
  double weight_decay = 0.0;
  uint64_t seed = 0;
  uint64_t data_seed = 1;
  std::string precision = "f64";
  bool unit_area = false;
  // model overrides
  std::string arch;
  std::vector<int> widths;
  int blocks = 2;
  int classes = 0;
  int accumulate = 8;
  int augment = 0;
  bool rerotate = false;
  // sphere-MNIST sizes
  size_t n_train = 2000, n_val = 500, n_test = 2000;
  std::string split = "test";
  bool only_split = false;  // manifests: build operators for `split` only
  size_t index = 0;
};

std::vector<int> parse_streams(const std::string& text) {
  if (text == "0") return {0};
  if (text == "0,1") return {0, 1};
  throw ShapeError("--streams must be '0' or '0,1'");
}

Precision parse_precision(const std::string& text) {
  if (text == "f32") return Precision::F32;
  if (text == "f64") return Precision::F64;
  throw ShapeError("--precision must be f32 or f64");
}

/// A mesh file, or `icosphere:N` for the built-in unit icosphere.
TriangleMesh load_mesh_arg(const std::string& spec, bool unit_area) {
  if (spec.empty()) throw IoError("a mesh is required (--mesh)");
  TriangleMesh mesh;
  if (spec.rfind("icosphere:", 0) == 0)
    mesh = make_icosphere(std::stoi(spec.substr(10)));
  else
    mesh = load_mesh_file(spec);
  return unit_area ? normalize_area(mesh) : mesh;
}

void report_mesh(const std::string& name, const TriangleMesh& mesh) {
  const auto report = validate_mesh(mesh);
  std::printf("mesh %s: %zu vertices, %zu faces, area %.6g, boundary: %s", name.c_str(), mesh.n_vertices(),
              mesh.n_faces(), report.total_area, report.boundary_edges ? "yes" : "no");
  if (report.boundary_edges) std::printf(" (%zu edges)", report.boundary_edges);
  std::printf("\n");
}

MultiScaleOptions multiscale_options(const Args& a) {
  MultiScaleOptions opt;
  opt.levels = a.levels;
  opt.ratios = a.ratio;
  opt.radius = a.epsilon;
  opt.radii = a.radii;
  return opt;
}

PrecomputedGraph graph_for(const TriangleMesh& mesh, const Args& a) {
  const auto orders = required_orders(parse_streams(a.streams));
  return precompute_mesh(mesh, build_tangent_frames(mesh), multiscale_options(a), a.rings, orders);
}

PrecomputedGraph cached_or_fresh(const TriangleMesh& mesh, const Args& a) {
  if (a.cache.empty()) return graph_for(mesh, a);
  auto g = load_cache(a.cache);
  if (g.n_mesh_vertices != mesh.n_vertices())
    throw ShapeError("cache '" + a.cache + "' was built for " + std::to_string(g.n_mesh_vertices) +
                     " vertices, mesh has " + std::to_string(mesh.n_vertices()));
  return g;
}

void print_graph(const PrecomputedGraph& g) {
  for (size_t l = 0; l < g.levels.size(); ++l)
    std::printf("  level %zu: %zu nodes, %zu edges, radius %.4g\n", l, g.levels[l].size(), g.levels[l].conv.n_edges(),
                g.levels[l].radius);
}

std::string find_idx(const std::string& dir, const std::string& kind) {
  std::vector<std::string> hits;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().filename().string().find(kind) != std::string::npos) hits.push_back(e.path().string());
  if (hits.empty()) throw IoError("no '*" + kind + "*' file in '" + dir + "'");
  std::sort(hits.begin(), hits.end());
  return hits.front();
}

/// Everything training or evaluation needs.
struct Task {
  std::string kind;  // "sphere-mnist", "classification", "segmentation"
  std::vector<GraphOps> ops;
  std::vector<Sample> train, val, test;
  ModelConfig defaults;
  std::function<void(std::span<Sample>, int epoch)> refresh;  // per-epoch training augmentation
};

Task sphere_mnist_task(const Args& a, const std::vector<int>& streams) {
  const auto sphere = load_mesh_arg(a.mesh.empty() ? "icosphere:3" : a.mesh, false);
  report_mesh(a.mesh.empty() ? "icosphere:3" : a.mesh, sphere);
  const auto graph = cached_or_fresh(sphere, a);
  print_graph(graph);
  const auto images = read_idx_images(find_idx(a.dataset, "images-idx3-ubyte"));
  const auto labels = read_idx_labels(find_idx(a.dataset, "labels-idx1-ubyte"));
  const auto split = make_sphere_mnist(images, labels, sphere, a.n_train + a.n_val, a.n_test, a.data_seed);
  Task t;
  t.kind = "sphere-mnist";
  auto all = digit_samples(split.train);
  t.train.assign(all.begin(), all.begin() + a.n_train);
  t.val.assign(all.begin() + a.n_train, all.end());
  t.test = digit_samples(split.test);
  // pixel/255 signals are small; unit RMS keeps C-ReLU biases from swamping them
  const double scale = 1.0 / input_rms(t.train);
  scale_inputs(t.train, scale);
  scale_inputs(t.val, scale);
  scale_inputs(t.test, scale);
  if (a.rerotate) {
    auto data = std::make_shared<std::tuple<ImageSet, TriangleMesh, std::vector<size_t>, std::mt19937_64>>(
        images, sphere, std::vector<size_t>(split.train.ids.begin(), split.train.ids.begin() + a.n_train),
        std::mt19937_64(a.data_seed ^ 0x5eedULL));
    t.refresh = [data, scale](std::span<Sample> train, int) {
      auto& [imgs, mesh, ids, rng] = *data;
      rerotate_digits(train, ids, imgs, mesh, scale, rng);
    };
  }

  auto& c = t.defaults;
  c = sphere_mnist_model(streams, graph.rings);
  c.levels = static_cast<int>(graph.levels.size());
  c.widths.resize(2 * c.levels, c.widths.back());
  t.ops.emplace_back(graph, streams);
  return t;
}

Task manifest_task(const Args& a, const std::vector<int>& streams) {
  const auto rows = load_manifest(a.dataset);
  if (rows.empty()) throw FormatError("manifest '" + a.dataset + "' lists no meshes");
  const fs::path base = fs::path(a.dataset).parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? p : (base / p).string(); };
  auto is_int = [](const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char ch) { return std::isdigit(ch); });
  };
  Task t;
  t.kind = is_int(rows.front().label) ? "classification" : "segmentation";
  std::mt19937_64 rng(a.data_seed);
  int max_label = 0;

  auto add = [&](const TriangleMesh& mesh, const std::string& split, std::vector<int> labels) {
    Sample s;
    s.input.resize(mesh.n_vertices(), 3);
    Vec3 centre = Vec3::Zero();
    for (const auto& v : mesh.vertices) centre += v / static_cast<double>(mesh.n_vertices());
    for (size_t i = 0; i < mesh.n_vertices(); ++i) s.input.row(i) = (mesh.vertices[i] - centre).transpose();
    s.labels = std::move(labels);
    s.graph = t.ops.size();
    t.ops.emplace_back(graph_for(mesh, a), streams);
    (split == "train" ? t.train : split == "val" ? t.val : t.test).push_back(std::move(s));
  };

  for (const auto& row : rows) {
    if (row.split != "train" && row.split != "val" && row.split != "test")
      throw FormatError("manifest split must be train, val or test, got '" + row.split + "'");
    if (a.only_split && row.split != a.split) continue;
    const auto mesh = load_mesh_arg(resolve(row.path), a.unit_area);
    report_mesh(row.path, mesh);
    std::vector<int> labels;
    if (t.kind == "classification") {
      if (!is_int(row.label)) throw FormatError("manifest mixes class ids and label files");
      labels = {std::stoi(row.label)};
      if (a.classes && labels[0] >= a.classes) throw FormatError("class id " + row.label + " out of range");
    } else {
      labels = load_labels(resolve(row.label), mesh.n_vertices(), a.classes ? a.classes : 1 << 30);
    }
    max_label = std::max(max_label, *std::max_element(labels.begin(), labels.end()));
    add(mesh, row.split, labels);
    if (row.split == "train")
      for (int k = 0; k < a.augment; ++k) add(augment_shape(mesh, rng), "train", labels);
  }

  auto& c = t.defaults;
  c.arch = t.kind == "classification" ? "classifier" : "uresnet";
  c.streams = streams;
  c.widths = {16, 32};
  c.in_channels = 3;
  c.n_classes = a.classes ? a.classes : max_label + 1;
  c.levels = 2;
  return t;
}

Task load_task(const Args& a, const std::vector<int>& streams) {
  if (a.dataset.empty()) throw IoError("a dataset is required (--dataset)");
  if (fs::is_directory(a.dataset)) return sphere_mnist_task(a, streams);
  return manifest_task(a, streams);
}

/// Sphere-MNIST geometry unless the user chose otherwise.
void apply_mnist_geometry(Args& a, const CLI::App& cmd) {
  if (a.dataset.empty() || !fs::is_directory(a.dataset)) return;
  const auto g = sphere_mnist_geometry();
  if (!cmd.count("--levels")) a.levels = g.levels;
  if (!cmd.count("--ratio")) a.ratio = g.ratios;
  if (!cmd.count("--epsilon")) a.epsilon = g.radius;
  if (!cmd.count("--radii") && !cmd.count("--epsilon")) a.radii = g.radii;
}

/// Geometry settings recorded in a checkpoint.
void apply_config_geometry(Args& a, const ModelConfig& c) {
  a.streams = c.streams.size() == 2 ? "0,1" : "0";
  a.epsilon = c.epsilon;
  a.rings = c.rings;
  a.levels = c.levels;
  a.ratio = c.ratios;
  a.radii = c.radii;
}

std::string read_text(const std::string& path) {
  const auto bytes = io::read_file(path);
  return {bytes.begin(), bytes.end()};
}

/// Defaults of the task, then the config file, then explicit flags.
ModelConfig model_config(const Task& task, const Args& a, const CLI::App& cmd) {
  ModelConfig c = task.defaults;
  if (!a.config.empty()) c = ModelConfig::parse(read_text(a.config));
  if (cmd.count("--arch")) c.arch = a.arch;
  if (cmd.count("--widths")) c.widths = a.widths;
  if (cmd.count("--blocks")) c.blocks = a.blocks;
  if (cmd.count("--classes")) c.n_classes = a.classes;
  c.streams = task.defaults.streams;
  // geometry fields echo the operators the model runs on
  c.epsilon = a.epsilon;
  c.ratios = a.ratio;
  c.rings = task.ops.front().rings();
  c.radii = a.radii;
  c.validate();
  return c;
}

void check_task_fits(const Task& task, const ModelConfig& c) {
  for (const auto& ops : task.ops) {
    if (ops.rings() != c.rings) throw ShapeError("cache ring count differs from the model's");
    if (ops.n_levels() < static_cast<size_t>(c.levels)) throw ShapeError("cache has fewer levels than the model");
  }
}

int cmd_precompute(const Args& a) {
  const auto start = std::chrono::steady_clock::now();
  const auto mesh = load_mesh_arg(a.mesh, a.unit_area);
  report_mesh(a.mesh, mesh);
  if (a.out.empty()) throw IoError("an output path is required (--out)");
  const auto graph = graph_for(mesh, a);
  save_cache(graph, a.out);
  print_graph(graph);
  std::printf("wrote %s in %.2fs\n", a.out.c_str(),
              std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  return 0;
}

int cmd_train(Args a, const CLI::App& cmd) {
  apply_mnist_geometry(a, cmd);
  if (a.checkpoint.empty() || a.out.empty()) throw IoError("train needs --checkpoint and --out");
  const auto streams = parse_streams(a.streams);
  const auto precision = parse_precision(a.precision);
  Task task = load_task(a, streams);
  const ModelConfig config = model_config(task, a, cmd);
  check_task_fits(task, config);
  std::printf("task %s: %zu train, %zu val, %zu test; model %s, %zu parameters\n", task.kind.c_str(),
              task.train.size(), task.val.size(), task.test.size(), config.arch.c_str(), count_parameters(config));

  Network net(config);
  net.initialize(a.seed);
  std::ofstream log(a.out);
  if (!log) throw IoError("cannot write '" + a.out + "'");
  log << "epoch,loss,accuracy,val_loss,val_accuracy,seconds\n";
  log.precision(17);

  if (a.epochs == 0) {
    const auto e = evaluate(net, task.ops, task.train, precision);
    log << 0 << ',' << e.loss << ',' << e.accuracy << ",,,0\n";
    save_checkpoint(net, a.checkpoint);
    std::printf("epoch 0: loss %.6f accuracy %.4f (initialization saved)\n", e.loss, e.accuracy);
    return 0;
  }

  TrainOptions opt;
  opt.epochs = a.epochs;
  opt.lr = a.lr;
  opt.lr_decay = a.lr_decay;
  opt.weight_decay = a.weight_decay;
  opt.seed = a.seed;
  opt.accumulate = a.accumulate;
  opt.precision = precision;
  if (task.refresh) opt.before_epoch = [&](int epoch) { task.refresh(task.train, epoch); };
  double best = -1.0;
  try {
    train(net, task.ops, task.train, task.val, opt, [&](const EpochStats& s) {
      log << s.epoch << ',' << s.loss << ',' << s.accuracy << ',';
      if (s.validation.count) log << s.validation.loss << ',' << s.validation.accuracy;
      else log << ',';
      log << ',' << s.seconds << '\n' << std::flush;
      const double metric = s.validation.count ? s.validation.accuracy : s.accuracy;
      std::printf("epoch %d: loss %.6f accuracy %.4f", s.epoch, s.loss, s.accuracy);
      if (s.validation.count) std::printf(" | val loss %.6f accuracy %.4f", s.validation.loss, s.validation.accuracy);
      std::printf(" (%.1fs)\n", s.seconds);
      std::fflush(stdout);
      if (metric > best) {
        best = metric;
        save_checkpoint(net, a.checkpoint);
      }
    });
  } catch (const NumericalError&) {
    const auto dump = a.checkpoint + ".nan";
    save_checkpoint(net, dump);
    std::fprintf(stderr, "parameters at the failure written to %s\n", dump.c_str());
    throw;
  }

  if (!task.test.empty()) {
    Network best_net = load_checkpoint(a.checkpoint);
    const auto e = evaluate(best_net, task.ops, task.test, precision);
    std::printf("test: %zu samples, loss %.6f, accuracy %.4f (best checkpoint)\n", e.count, e.loss, e.accuracy);
  }
  return 0;
}

int cmd_eval(const Args& a) {
  if (a.checkpoint.empty()) throw IoError("eval needs --checkpoint");
  Network net = load_checkpoint(a.checkpoint);
  const auto& c = net.config();
  const auto precision = parse_precision(a.precision);
  Args args = a;
  apply_config_geometry(args, c);
  args.only_split = true;
  if (a.split != "train" && a.split != "val" && a.split != "test") throw ShapeError("--split must be train, val or test");
  const Task task = load_task(args, c.streams);
  check_task_fits(task, c);
  const auto& set = a.split == "train" ? task.train : a.split == "val" ? task.val : task.test;
  if (set.empty()) throw FormatError("the dataset has no '" + a.split + "' samples");
  const auto e = evaluate(net, task.ops, set, precision);
  std::printf("%s: %zu samples, loss %.6f, accuracy %.4f\n", a.split.c_str(), e.count, e.loss, e.accuracy);
  if (!a.out.empty()) {
    std::ofstream out(a.out);
    if (!out) throw IoError("cannot write '" + a.out + "'");
    out.precision(17);
    out << "split,count,loss,accuracy\n" << a.split << ',' << e.count << ',' << e.loss << ',' << e.accuracy << '\n';
  }
  return 0;
}

int cmd_export(const Args& a) {
  if (a.checkpoint.empty() || a.out.empty()) throw IoError("export-ply needs --checkpoint and --out");
  Network net = load_checkpoint(a.checkpoint);
  const auto& c = net.config();
  const auto mesh = load_mesh_arg(a.mesh, a.unit_area);
  report_mesh(a.mesh, mesh);
  Args args = a;
  apply_config_geometry(args, c);
  const auto graph = cached_or_fresh(mesh, args);
  const GraphOps ops(graph, c.streams);
  if (graph.levels.front().size() != mesh.n_vertices()) throw ShapeError("level 0 must cover every mesh vertex");

  ad::ParamMatrix input;
  if (!a.dataset.empty()) {
    const Task task = load_task(args, c.streams);
    if (a.index >= task.test.size()) throw ShapeError("--index beyond the test split");
    input = task.test[a.index].input;
  } else if (c.in_channels == 3) {
    input.resize(mesh.n_vertices(), 3);
    for (size_t i = 0; i < mesh.n_vertices(); ++i) input.row(i) = mesh.vertices[i].transpose();
  } else {
    input = ad::ParamMatrix::Ones(mesh.n_vertices(), c.in_channels);
  }

  ad::Tape<double> t;
  ForwardTrace<double> trace;
  net.forward(t, ops, input, &trace);
  // carry the head and the M = 1 features back to every mesh vertex
  Streams fields{trace.head};
  std::vector<int> orders{0};
  if (c.streams.size() == 2) {
    fields.push_back(trace.features[1]);
    orders.push_back(1);
  }
  for (size_t l = net.feature_level(); l-- > 0;) fields = unpool(t, ops, l, fields, orders);

  const auto frames = build_tangent_frames(mesh);
  const size_t n = mesh.n_vertices();
  PlyProperty label{"label", PlyProperty::Type::U8, std::vector<double>(n)};
  PlyProperty mag{"feat_mag", PlyProperty::Type::F32, std::vector<double>(n, 0.0)};
  PlyProperty vx{"vec_x", PlyProperty::Type::F32, std::vector<double>(n, 0.0)};
  PlyProperty vy = vx, vz = vx;
  vy.name = "vec_y";
  vz.name = "vec_z";
  for (size_t i = 0; i < n; ++i) {
    Eigen::Index best;
    (t.re(fields[0]).row(i).cwiseAbs2() + t.im(fields[0]).row(i).cwiseAbs2()).maxCoeff(&best);
    label.values[i] = static_cast<double>(best);
    if (fields.size() > 1) {
      const double re = t.re(fields[1])(i, 0), im = t.im(fields[1])(i, 0);
      const Vec3 v = re * frames.e1[i] + im * frames.e2[i];
      mag.values[i] = std::hypot(re, im);
      vx.values[i] = v.x();
      vy.values[i] = v.y();
      vz.values[i] = v.z();
    }
  }
  const std::vector<PlyProperty> props = {label, mag, vx, vy, vz};
  io::write_file(a.out, write_ply(mesh, props));
  std::printf("wrote %s\n", a.out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Harmonic surface networks: precompute operators, train, evaluate and export."};
  app.require_subcommand(1);
  Args a;

  auto geometry = [&](CLI::App* c) {
    c->add_option("--mesh", a.mesh, "Mesh file (OBJ/OFF/PLY) or icosphere:N");
    c->add_option("--epsilon", a.epsilon, "Support radius of the finest level")->capture_default_str();
    c->add_option("--rings", a.rings, "Radial rings Q")->capture_default_str();
    c->add_option("--levels", a.levels, "Number of scales")->capture_default_str();
    c->add_option("--ratio", a.ratio, "Sampling ratio per pooling step (comma list)")->delimiter(',');
    c->add_option("--radii", a.radii, "Explicit support radius per level (comma list)")->delimiter(',');
    c->add_option("--streams", a.streams, "Rotation-order streams: 0 or 0,1")->capture_default_str();
    c->add_flag("--unit-area", a.unit_area, "Rescale meshes to unit surface area");
  };
  auto data = [&](CLI::App* c) {
    c->add_option("--dataset", a.dataset, "MNIST IDX directory (sphere-MNIST) or manifest CSV (path,label,split)");
    c->add_option("--cache", a.cache, "Precomputed operator cache (sphere-MNIST / export)");
    c->add_option("--precision", a.precision, "f32 or f64")->capture_default_str();
    c->add_option("--data-seed", a.data_seed, "Seed of the data split and augmentation")->capture_default_str();
    c->add_option("--train-count", a.n_train, "sphere-MNIST training digits")->capture_default_str();
    c->add_option("--val-count", a.n_val, "sphere-MNIST validation digits")->capture_default_str();
    c->add_option("--test-count", a.n_test, "sphere-MNIST test digits")->capture_default_str();
  };

  auto* pre = app.add_subcommand("precompute", "Build the operator cache of a mesh");
  geometry(pre);
  pre->add_option("--out", a.out, "Cache file to write")->required();

  auto* tr = app.add_subcommand("train", "Train a model and keep the best checkpoint");
  geometry(tr);
  data(tr);
  tr->add_option("--checkpoint", a.checkpoint, "Checkpoint to write")->required();
  tr->add_option("--out", a.out, "CSV training log")->required();
  tr->add_option("--seed", a.seed, "Seed of initialization and sample order")->required();
  tr->add_option("--epochs", a.epochs, "Epochs")->capture_default_str();
  tr->add_option("--lr", a.lr, "Adam learning rate")->capture_default_str();
  tr->add_option("--lr-decay", a.lr_decay, "Learning-rate factor per epoch")->capture_default_str();
  tr->add_option("--weight-decay", a.weight_decay, "Decoupled weight decay on filters and linear weights")
      ->capture_default_str();
  tr->add_option("--accumulate", a.accumulate, "Samples per Adam step")->capture_default_str();
  tr->add_option("--config", a.config, "Model config file (key = value)");
  tr->add_option("--arch", a.arch, "uresnet, classifier or mnist");
  tr->add_option("--widths", a.widths, "Channel widths (comma list)")->delimiter(',');
  tr->add_option("--blocks", a.blocks, "Residual blocks per stack");
  tr->add_option("--classes", a.classes, "Number of classes");
  tr->add_option("--augment", a.augment, "Augmented copies per training mesh")->capture_default_str();
  tr->add_flag("--rerotate", a.rerotate, "Sphere-MNIST: draw fresh training rotations every epoch");

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  geometry(ev);
  data(ev);
  ev->add_option("--checkpoint", a.checkpoint, "Checkpoint to read")->required();
  ev->add_option("--split", a.split, "train, val or test")->capture_default_str();
  ev->add_option("--out", a.out, "CSV metrics file");

  auto* ex = app.add_subcommand("export-ply", "Write predictions and M = 1 features as a PLY");
  geometry(ex);
  data(ex);
  ex->add_option("--checkpoint", a.checkpoint, "Checkpoint to read")->required();
  ex->add_option("--out", a.out, "PLY file to write")->required();
  ex->add_option("--index", a.index, "Test sample used as input (with --dataset)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (pre->parsed()) return cmd_precompute(a);
    if (tr->parsed()) return cmd_train(a, *tr);
    if (ev->parsed()) return cmd_eval(a);
    return cmd_export(a);
  } catch (const GeometryError& e) {
    std::fprintf(stderr, "geometry error: %s\n", e.what());
    return 2;
  } catch (const IoError& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return 3;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
