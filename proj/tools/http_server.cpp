#include "http_server.hpp"

#include <charconv>
#include <cmath>

#include "render.hpp"

namespace lstool {

namespace {

constexpr size_t kMaxBodyBytes = 64u << 20;

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, ls_status s, const std::string& message) {
  send_json(res, http_status(s), {{"error", ls_status_name(s)}, {"message", message}});
}

// Bad query-string values are the caller's fault.
[[noreturn]] void bad_param(const std::string& what) { throw StatusError(LS_INVALID_ARGUMENT, what); }

size_t parse_k(const std::string& v) {
  size_t k = 0;
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), k);
  if (ec != std::errc() || end != v.data() + v.size() || k < 1) bad_param("k must be a positive integer, got '" + v + "'");
  return k;
}

double parse_thr(const std::string& v) {
  size_t used = 0;
  double thr = 0.0;
  try {
    thr = std::stod(v, &used);
  } catch (const std::exception&) {
    bad_param("thr must be a number, got '" + v + "'");
  }
  if (used != v.size() || !std::isfinite(thr)) bad_param("thr must be a number, got '" + v + "'");
  return thr;
}

template <typename F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const StatusError& e) {
    send_error(res, e.status(), e.what());
  } catch (const std::exception& e) {
    send_error(res, LS_INTERNAL, e.what());
  }
}

const uint8_t* body_bytes(const httplib::Request& req) { return reinterpret_cast<const uint8_t*>(req.body.data()); }

}  // namespace

int http_status(ls_status s) {
  switch (s) {
    case LS_OK: return 200;
    case LS_INVALID_ARGUMENT:
    case LS_SHAPE_MISMATCH:
    case LS_OUT_OF_RANGE:
    case LS_IMAGE_DECODE: return 400;
    case LS_NOT_FOUND: return 404;
    default: return 500;
  }
}

void install_routes(httplib::Server& server, ls_engine* engine, const ServerOptions& options) {
  server.set_payload_max_length(kMaxBodyBytes);
  server.Post("/images", [engine, options](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      ls_ingest_result r{};
      check(ls_ingest(engine, body_bytes(req), req.body.size(), options.embed_codec, &r));
      send_json(res, 200, ingest_json(r));
    });
  });

  server.Post("/search", [engine, options](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      ls_query_params p{options.default_k, options.default_thr.has_value(), options.default_thr.value_or(0.0)};
      if (req.has_param("k")) p.k = parse_k(req.get_param_value("k"));
      if (req.has_param("thr")) {
        p.has_thr = 1;
        p.thr = parse_thr(req.get_param_value("thr"));
      }
      QueryResult q;
      check(ls_query(engine, body_bytes(req), req.body.size(), &p, &q.r));
      send_json(res, 200, query_json(q.r));
    });
  });

  server.Get(R"(/images/(\d+))", [engine](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      uint64_t id = 0;
      const std::string s = req.matches[1];
      const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), id);
      if (ec != std::errc() || end != s.data() + s.size()) throw StatusError(LS_NOT_FOUND, "no record " + s);
      bool decode = true;
      if (req.has_param("decode")) {
        const std::string v = req.get_param_value("decode");
        if (v == "true" || v == "1") {
          decode = true;
        } else if (v == "false" || v == "0") {
          decode = false;
        } else {
          bad_param("decode must be true or false, got '" + v + "'");
        }
      }
      Buffer out;
      check(ls_fetch(engine, id, decode ? 1 : 0, &out.b));
      res.status = 200;
      res.set_content(out.str(), decode ? "image/png" : "application/octet-stream");
    });
  });

  server.Get("/stats", [engine](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] {
      ls_stats s{};
      check(ls_engine_stats(engine, &s));
      send_json(res, 200, stats_json(s));
    });
  });

  server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      send_error(res, LS_INTERNAL, e.what());
    } catch (...) {
      send_error(res, LS_INTERNAL, "unknown error");
    }
  });
}

}  // namespace lstool
