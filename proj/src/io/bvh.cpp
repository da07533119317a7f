#include "unimask/io/bvh.hpp"

#include <charconv>
#include <sstream>
#include <vector>

#include "unimask/error.hpp"
#include "unimask/io/files.hpp"
#include "unimask/kinematics/rotation.hpp"

namespace unimask::io {

namespace {

struct Token {
  std::string text;
  int line = 0;
};

std::vector<Token> tokenize(const std::string& text) {
  std::vector<Token> out;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    std::istringstream words(line);
    std::string w;
    while (words >> w) out.push_back({w, number});
  }
  return out;
}

double to_number(const Token& t) {
  double v = 0.0;
  const char* first = t.text.data();
  const char* last = first + t.text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) throw ParseError("expected a number, got '" + t.text + "'", t.line);
  return v;
}

enum class Channel { kXpos, kYpos, kZpos, kXrot, kYrot, kZrot };

Channel parse_channel(const Token& t) {
  if (t.text == "Xposition") return Channel::kXpos;
  if (t.text == "Yposition") return Channel::kYpos;
  if (t.text == "Zposition") return Channel::kZpos;
  if (t.text == "Xrotation") return Channel::kXrot;
  if (t.text == "Yrotation") return Channel::kYrot;
  if (t.text == "Zrotation") return Channel::kZrot;
  throw ParseError("unknown channel '" + t.text + "'", t.line);
}

struct JointSpec {
  std::string name;
  int parent = -1;
  kin::Vec3 offset = kin::Vec3::Zero();
  std::vector<Channel> channels;
};

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

  const Token& peek() const {
    if (pos_ >= tokens_.size()) {
      throw ParseError("unexpected end of file", tokens_.empty() ? 0 : tokens_.back().line);
    }
    return tokens_[pos_];
  }
  const Token& next() {
    const Token& t = peek();
    ++pos_;
    return t;
  }
  bool done() const { return pos_ >= tokens_.size(); }
  void expect(const std::string& word) {
    const Token& t = next();
    if (t.text != word) throw ParseError("expected '" + word + "', got '" + t.text + "'", t.line);
  }
  int last_line() const { return tokens_.empty() ? 0 : tokens_.back().line; }

  void joint_body(int index, std::vector<JointSpec>& joints) {
    expect("{");
    bool offset_seen = false;
    while (true) {
      const Token& t = next();
      if (t.text == "}") break;
      if (t.text == "OFFSET") {
        for (int k = 0; k < 3; ++k) joints[index].offset[k] = to_number(next());
        offset_seen = true;
      } else if (t.text == "CHANNELS") {
        const Token& count = next();
        const double n = to_number(count);
        if (n < 0 || n > 6 || n != static_cast<int>(n)) {
          throw ParseError("bad channel count '" + count.text + "'", count.line);
        }
        for (int k = 0; k < static_cast<int>(n); ++k) {
          joints[index].channels.push_back(parse_channel(next()));
        }
      } else if (t.text == "JOINT") {
        const Token& name = next();
        joints.push_back({name.text, index, kin::Vec3::Zero(), {}});
        joint_body(static_cast<int>(joints.size()) - 1, joints);
      } else if (t.text == "End") {
        expect("Site");
        expect("{");
        const Token& o = next();
        if (o.text != "OFFSET") throw ParseError("End Site needs an OFFSET", o.line);
        for (int k = 0; k < 3; ++k) to_number(next());
        const Token& close = next();
        if (close.text != "}") throw ParseError("unbalanced braces in End Site", close.line);
      } else if (t.text == "MOTION" || t.text == "ROOT") {
        throw ParseError("unbalanced braces before '" + t.text + "'", t.line);
      } else {
        throw ParseError("unexpected token '" + t.text + "' in joint block", t.line);
      }
    }
    if (!offset_seen) throw ParseError("joint '" + joints[index].name + "' has no OFFSET", peek_line());
  }

 private:
  int peek_line() const { return pos_ < tokens_.size() ? tokens_[pos_].line : last_line(); }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

}  // namespace

BvhMotion parse_bvh(const std::string& text, const std::string& name) {
  Parser p(tokenize(text));
  p.expect("HIERARCHY");
  p.expect("ROOT");
  std::vector<JointSpec> joints;
  joints.push_back({p.next().text, -1, kin::Vec3::Zero(), {}});
  p.joint_body(0, joints);
  {
    const Token& t = p.next();
    if (t.text == "}") throw ParseError("unbalanced braces: stray '}'", t.line);
    if (t.text != "MOTION") throw ParseError("expected 'MOTION', got '" + t.text + "'", t.line);
  }
  const Token& frames_key = p.next();
  if (frames_key.text != "Frames:") {
    throw ParseError("expected 'Frames:', got '" + frames_key.text + "'", frames_key.line);
  }
  const double frames_value = to_number(p.next());
  if (frames_value < 0 || frames_value != static_cast<double>(static_cast<std::size_t>(frames_value))) {
    throw ParseError("frame count must be a non-negative integer", frames_key.line);
  }
  const auto frames = static_cast<std::size_t>(frames_value);
  p.expect("Frame");
  p.expect("Time:");
  const Token& dt_tok = p.next();
  const double dt = to_number(dt_tok);
  if (!(dt > 0.0)) throw ParseError("frame time must be positive", dt_tok.line);

  std::size_t per_frame = 0;
  for (const auto& j : joints) per_frame += j.channels.size();
  std::vector<std::vector<Token>> rows;
  int current_line = -1;
  while (!p.done()) {
    const Token& t = p.next();
    if (t.line != current_line) {
      rows.emplace_back();
      current_line = t.line;
    }
    rows.back().push_back(t);
  }
  for (const auto& row : rows) {
    if (row.size() != per_frame) {
      throw ParseError("frame row has " + std::to_string(row.size()) + " values, expected " +
                           std::to_string(per_frame),
                       row.front().line);
    }
  }
  if (rows.size() != frames) {
    throw ParseError("'Frames: " + std::to_string(frames) + "' but " +
                         std::to_string(rows.size()) + " data rows follow",
                     frames_key.line);
  }

  std::vector<kin::Joint> topo_joints;
  for (const auto& j : joints) topo_joints.push_back({j.name, j.parent, j.offset});
  BvhMotion out;
  try {
    out.topology = kin::SkeletonTopology(name, std::move(topo_joints));
  } catch (const ContractError& e) {
    throw ParseError(e.what(), 0);
  }
  const std::size_t J = joints.size();
  auto m = kin::MotionTensor::zeros(frames, J, kin::Representation::kOrtho6d, 1.0 / dt);
  std::vector<double> root(frames * 3, 0.0);
  for (std::size_t t = 0; t < frames; ++t) {
    std::size_t col = 0;
    for (std::size_t j = 0; j < J; ++j) {
      std::string axes;
      std::vector<double> degrees;
      for (Channel c : joints[j].channels) {
        const double v = to_number(rows[t][col++]);
        switch (c) {
          case Channel::kXpos: if (j == 0) root[t * 3 + 0] = v; break;
          case Channel::kYpos: if (j == 0) root[t * 3 + 1] = v; break;
          case Channel::kZpos: if (j == 0) root[t * 3 + 2] = v; break;
          case Channel::kXrot: axes += 'X'; degrees.push_back(v); break;
          case Channel::kYrot: axes += 'Y'; degrees.push_back(v); break;
          case Channel::kZrot: axes += 'Z'; degrees.push_back(v); break;
        }
      }
      const kin::Quaternion q =
          axes.empty() ? kin::Quaternion::identity() : kin::euler_to_quaternion(axes, degrees);
      const auto r6 = kin::matrix_to_rot6d(q.to_matrix());
      for (std::size_t k = 0; k < 6; ++k) m.at(t, j, k) = r6[k];
    }
  }
  m.root_translation = std::move(root);
  out.motion = std::move(m);
  return out;
}

BvhMotion read_bvh(const std::filesystem::path& path) {
  return parse_bvh(read_file(path), path.stem().string());
}

}  // namespace unimask::io
