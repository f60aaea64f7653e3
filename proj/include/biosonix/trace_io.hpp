#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "anatomy.hpp"
#include "biomech.hpp"
#include "error.hpp"

namespace biosonix {

inline constexpr std::string_view kTraceHeader = "time_s,node_id,ux_m,uy_m,uz_m";
inline constexpr std::string_view kNodesHeader = "node_id,x_m,y_m,z_m,class_id";

// Writes through a sibling temporary and renames, so readers never see a partial file.
inline void write_file_atomic(const std::filesystem::path& path,
                              const std::function<void(std::ostream&)>& body) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorCode::Io, "cannot open " + tmp.string() + " for writing");
    body(out);
    out.flush();
    require(static_cast<bool>(out), ErrorCode::Io, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    fail(ErrorCode::Io, "cannot move temporary file into place at " + path.string());
  }
}

namespace detail {

// Shortest representation that parses back to the identical double.
inline void append_number(std::string& out, double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

inline void append_number(std::string& out, long long v) {
  char buf[24];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

template <typename T>
bool parse_field(std::string_view text, T& value) {
  if (text.empty()) return false;
  const char* first = text.data();
  if constexpr (std::is_floating_point_v<T>) {
    if (*first == '+') ++first;
  }
  auto res = std::from_chars(first, text.data() + text.size(), value);
  return res.ec == std::errc() && res.ptr == text.data() + text.size();
}

inline std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path.string());
  std::string data;
  in.seekg(0, std::ios::end);
  data.resize(static_cast<std::size_t>(in.tellg()));
  in.seekg(0);
  in.read(data.data(), static_cast<std::streamsize>(data.size()));
  require(static_cast<bool>(in), ErrorCode::Io, "cannot read " + path.string());
  return data;
}

// Iterates non-empty lines, tolerating CRLF.
template <typename Fn>
void for_each_line(std::string_view data, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < data.size()) {
    std::size_t end = data.find('\n', start);
    if (end == std::string_view::npos) end = data.size();
    std::string_view line = data.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    if (!line.empty()) fn(line_no, line);
    start = end + 1;
  }
}

}  // namespace detail

inline void save_trace(const DisplacementTrace& trace, const std::filesystem::path& path) {
  trace.validate();
  write_file_atomic(path, [&](std::ostream& out) {
    std::string chunk;
    chunk.reserve(1 << 20);
    chunk.append(kTraceHeader).push_back('\n');
    for (std::size_t f = 0; f < trace.frame_count(); ++f) {
      for (std::size_t n = 0; n < trace.node_count(); ++n) {
        const Vec3& u = trace.at(f, n);
        detail::append_number(chunk, trace.times[f]);
        chunk.push_back(',');
        detail::append_number(chunk, static_cast<long long>(trace.node_ids[n]));
        for (double c : {u.x, u.y, u.z}) {
          chunk.push_back(',');
          detail::append_number(chunk, c);
        }
        chunk.push_back('\n');
        if (chunk.size() > (1 << 20) - 256) {
          out.write(chunk.data(), static_cast<std::streamsize>(chunk.size()));
          chunk.clear();
        }
      }
    }
    out.write(chunk.data(), static_cast<std::streamsize>(chunk.size()));
  });
}

// Parses the trace CSV. Rows must be sorted by (time, node_id) and every frame must list
// the same nodes; the frame spacing must be uniform within 1e-9 s.
inline DisplacementTrace load_trace(const std::filesystem::path& path,
                                    const AnatomicalDomain& domain) {
  const std::string data = detail::read_all(path);
  DisplacementTrace trace;
  trace.source = TraceSource::Ingested;
  bool header_seen = false;
  std::size_t column = 0;  // position within the current frame's node list
  bool first_frame = true;

  detail::for_each_line(data, [&](std::size_t line_no, std::string_view line) {
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (!header_seen) {
      require(line == kTraceHeader, ErrorCode::MalformedRow,
              where + ": expected header '" + std::string(kTraceHeader) + "'");
      header_seen = true;
      return;
    }
    const auto fields = detail::split_fields(line);
    require(fields.size() == 5, ErrorCode::MalformedRow, where + ": expected 5 columns");
    double t = 0.0;
    long long id = 0;
    Vec3 u;
    require(detail::parse_field(fields[0], t) && detail::parse_field(fields[1], id) &&
                detail::parse_field(fields[2], u.x) && detail::parse_field(fields[3], u.y) &&
                detail::parse_field(fields[4], u.z),
            ErrorCode::MalformedRow, where + ": unparsable field");
    require(std::isfinite(t) && is_finite(u), ErrorCode::NonFiniteValue,
            where + ": non-finite value");
    require(domain.has_node(id), ErrorCode::UnknownNode,
            where + ": node id " + std::to_string(id) + " is not in the domain");

    const bool new_frame = trace.times.empty() || t != trace.times.back();
    if (new_frame) {
      if (!trace.times.empty()) {
        require(t > trace.times.back(), ErrorCode::MalformedRow, where + ": time goes backwards");
        require(column == trace.node_ids.size(), ErrorCode::MalformedRow,
                where + ": previous frame is missing nodes");
        first_frame = false;
      }
      trace.times.push_back(t);
      column = 0;
    }
    if (first_frame) {
      require(trace.node_ids.empty() || id > trace.node_ids.back(), ErrorCode::MalformedRow,
              where + ": node ids must be strictly ascending within a frame");
      trace.node_ids.push_back(id);
    } else {
      require(column < trace.node_ids.size() && trace.node_ids[column] == id,
              ErrorCode::MalformedRow, where + ": node ordering differs from the first frame");
    }
    trace.frames.push_back(u);
    ++column;
  });
  require(header_seen, ErrorCode::MalformedRow, path.string() + ": empty file");
  require(column == trace.node_ids.size(), ErrorCode::MalformedRow,
          path.string() + ": last frame is missing nodes");
  require(trace.times.size() >= 2, ErrorCode::MalformedRow,
          path.string() + ": trace needs at least two frames");

  const std::size_t n = trace.times.size();
  const double t0 = trace.times.front();
  const double step = (trace.times.back() - t0) / static_cast<double>(n - 1);
  for (std::size_t k = 0; k < n; ++k) {
    require(std::abs(trace.times[k] - (t0 + static_cast<double>(k) * step)) <= 1e-9,
            ErrorCode::NonUniformFrames,
            path.string() + ": frame " + std::to_string(k) + " breaks uniform spacing");
  }
  trace.frame_rate = 1.0 / step;
  trace.validate();
  return trace;
}

inline void save_nodes(const AnatomicalDomain& domain, const std::vector<NodeId>& ids,
                       const std::filesystem::path& path) {
  write_file_atomic(path, [&](std::ostream& out) {
    std::string chunk;
    chunk.append(kNodesHeader).push_back('\n');
    for (NodeId id : ids) {
      const Node& node = domain.nodes()[domain.index_of(id)];
      detail::append_number(chunk, static_cast<long long>(node.id));
      for (double c : {node.position.x, node.position.y, node.position.z}) {
        chunk.push_back(',');
        detail::append_number(chunk, c);
      }
      chunk.push_back(',');
      detail::append_number(chunk, static_cast<long long>(node.class_id));
      chunk.push_back('\n');
    }
    out.write(chunk.data(), static_cast<std::streamsize>(chunk.size()));
  });
}

inline std::vector<Node> load_nodes(const std::filesystem::path& path) {
  const std::string data = detail::read_all(path);
  std::vector<Node> nodes;
  bool header_seen = false;
  detail::for_each_line(data, [&](std::size_t line_no, std::string_view line) {
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (!header_seen) {
      require(line == kNodesHeader, ErrorCode::MalformedRow, where + ": bad header");
      header_seen = true;
      return;
    }
    const auto fields = detail::split_fields(line);
    require(fields.size() == 5, ErrorCode::MalformedRow, where + ": expected 5 columns");
    long long id = 0;
    long long cls = 0;
    Vec3 p;
    require(detail::parse_field(fields[0], id) && detail::parse_field(fields[1], p.x) &&
                detail::parse_field(fields[2], p.y) && detail::parse_field(fields[3], p.z) &&
                detail::parse_field(fields[4], cls),
            ErrorCode::MalformedRow, where + ": unparsable field");
    nodes.push_back({id, p, static_cast<ClassId>(cls)});
  });
  return nodes;
}

}  // namespace biosonix
