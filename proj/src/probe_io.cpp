#include "apt/probe.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include <json.hpp>

namespace apt {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// One CSV line -> fields; rejects ragged rows against an expected width.
std::vector<std::string> split_fields(const std::string& line, size_t expected,
                                      int line_no) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  if (out.size() != expected)
    throw ParseError("expected " + std::to_string(expected) + " fields, got " +
                         std::to_string(out.size()),
                     line_no);
  return out;
}

int parse_int(const std::string& s, int line_no) {
  try {
    size_t used = 0;
    int v = std::stoi(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError("bad integer '" + s + "'", line_no);
  }
}

double parse_double(const std::string& s, int line_no) {
  const char* begin = s.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end != begin + s.size() || s.empty())
    throw ParseError("bad number '" + s + "'", line_no);
  return v;
}

}  // namespace

std::string heatmap_csv(const std::vector<std::vector<double>>& mean_alpha) {
  std::string out = "layer,token,mean_alpha\n";
  for (size_t i = 0; i < mean_alpha.size(); ++i)
    for (size_t j = 0; j < mean_alpha[i].size(); ++j)
      out += std::to_string(i) + ',' + std::to_string(j) + ',' +
             fmt17(mean_alpha[i][j]) + '\n';
  return out;
}

std::vector<std::vector<double>> parse_heatmap_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  if (!std::getline(in, line) || (line != "layer,token,mean_alpha" &&
                                  line != "layer,token,mean_alpha\r"))
    throw ParseError("expected header 'layer,token,mean_alpha'", 1);
  line_no = 1;
  std::vector<std::vector<double>> out;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto f = split_fields(line, 3, line_no);
    const int layer = parse_int(f[0], line_no);
    const int token = parse_int(f[1], line_no);
    if (layer == int(out.size()) && token == 0) out.emplace_back();
    if (layer != int(out.size()) - 1 || token != int(out.back().size()))
      throw ParseError("rows must be ordered by layer then token", line_no);
    out.back().push_back(parse_double(f[2], line_no));
  }
  return out;
}

std::string lambda_csv(const std::vector<double>& lambda) {
  std::string out = "layer,lambda\n";
  for (size_t i = 0; i < lambda.size(); ++i)
    out += std::to_string(i) + ',' + fmt17(lambda[i]) + '\n';
  return out;
}

std::vector<double> parse_lambda_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || (line != "layer,lambda" && line != "layer,lambda\r"))
    throw ParseError("expected header 'layer,lambda'", 1);
  int line_no = 1;
  std::vector<double> out;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto f = split_fields(line, 2, line_no);
    if (parse_int(f[0], line_no) != int(out.size()))
      throw ParseError("rows must be ordered by layer", line_no);
    out.push_back(parse_double(f[1], line_no));
  }
  return out;
}

// Grayscale grid, one row per layer, one column per prefix token. Shading
// is linear in the gate value with 1.0 mapped to black, so more-active
// prefix tokens are darker. Ragged layers simply render shorter rows.
std::string heatmap_svg(const std::vector<std::vector<double>>& mean_alpha) {
  const int cell = 24, pad = 4, label_w = 56, label_h = 20;
  size_t max_len = 0;
  for (const auto& layer : mean_alpha) max_len = std::max(max_len, layer.size());
  const int width = label_w + int(max_len) * (cell + pad) + pad;
  const int height = label_h + int(mean_alpha.size()) * (cell + pad) + pad;

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
         "\" height=\"" + std::to_string(height) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (size_t j = 0; j < max_len; ++j)
    svg += "<text x=\"" + std::to_string(label_w + int(j) * (cell + pad) + cell / 2) +
           "\" y=\"14\" font-size=\"11\" text-anchor=\"middle\">t" + std::to_string(j) +
           "</text>\n";
  for (size_t i = 0; i < mean_alpha.size(); ++i) {
    const int y = label_h + int(i) * (cell + pad);
    svg += "<text x=\"4\" y=\"" + std::to_string(y + cell / 2 + 4) +
           "\" font-size=\"11\">layer " + std::to_string(i) + "</text>\n";
    for (size_t j = 0; j < mean_alpha[i].size(); ++j) {
      const double a = std::clamp(mean_alpha[i][j], 0.0, 1.0);
      const int shade = int(std::lround(255.0 * (1.0 - a)));
      const int x = label_w + int(j) * (cell + pad);
      svg += "<rect x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) +
             "\" width=\"" + std::to_string(cell) + "\" height=\"" +
             std::to_string(cell) + "\" fill=\"rgb(" + std::to_string(shade) + "," +
             std::to_string(shade) + "," + std::to_string(shade) + ")\"><title>" +
             fmt17(mean_alpha[i][j]) + "</title></rect>\n";
    }
  }
  svg += "</svg>\n";
  return svg;
}

std::string plan_to_json(const VariablePrefixPlan& plan) {
  nlohmann::json j{
      {"lengths", plan.lengths}, {"tau", plan.tau}, {"source", plan.source}};
  return j.dump(2) + "\n";
}

VariablePrefixPlan plan_from_json(const std::string& text) {
  VariablePrefixPlan plan;
  try {
    nlohmann::json j = nlohmann::json::parse(text);
    plan.lengths = j.at("lengths").get<std::vector<int>>();
    plan.tau = j.value("tau", 0.5);
    plan.source = j.value("source", "");
  } catch (const nlohmann::json::exception& e) {
    throw RejectedInput(std::string("prefix plan JSON: ") + e.what());
  }
  return plan;
}

}  // namespace apt
