#include "affectfuse/affectfuse.h"

#include "affectfuse/commands.hpp"
#include "affectfuse/config.hpp"
#include "affectfuse/error.hpp"
#include "affectfuse/eval.hpp"
#include "affectfuse/pipeline.hpp"

#include <cstring>
#include <new>
#include <string>
#include <vector>

struct afx_config {
  affectfuse::config::Config cfg;
};

struct afx_result {
  std::vector<std::string> lines;
};

namespace {

using affectfuse::Errc;
using affectfuse::Error;

static_assert(static_cast<int>(Errc::internal) == AFX_E_INTERNAL);
static_assert(static_cast<int>(Errc::config_error) == AFX_E_CONFIG);
static_assert(static_cast<int>(Errc::empty_fold) == AFX_E_EMPTY_FOLD);

thread_local std::string g_last_error;

afx_status fail(Errc code, const std::string& msg) {
  g_last_error = msg;
  return static_cast<afx_status>(code);
}

template <class F>
afx_status guarded(F&& fn) {
  try {
    fn();
    return AFX_OK;
  } catch (const Error& e) {
    return fail(e.code(), e.what());
  } catch (const std::bad_alloc&) {
    return fail(Errc::internal, "out of memory");
  } catch (const std::exception& e) {
    return fail(Errc::internal, e.what());
  } catch (...) {
    return fail(Errc::internal, "unknown exception");
  }
}

afx_status copy_out(const std::string& s, char* buf, size_t cap, size_t* needed) {
  if (needed) *needed = s.size() + 1;
  if (cap > 0) {
    if (!buf) return fail(Errc::invalid_argument, "null buffer with nonzero capacity");
    const size_t n = std::min(cap - 1, s.size());
    std::memcpy(buf, s.data(), n);
    buf[n] = '\0';
  }
  return AFX_OK;
}

}  // namespace

extern "C" {

const char* afx_version(void) { return "0.1.0"; }

const char* afx_status_name(afx_status status) {
  if (status < AFX_OK || status > AFX_E_INTERNAL) return "Unknown";
  // errc_name returns views of string literals, so data() is NUL-terminated.
  return affectfuse::errc_name(static_cast<Errc>(status)).data();
}

const char* afx_last_error(void) { return g_last_error.c_str(); }

afx_status afx_config_new(afx_config** out) {
  if (!out) return fail(Errc::invalid_argument, "null output handle");
  return guarded([&] { *out = new afx_config{}; });
}

afx_status afx_config_load(const char* path, afx_config** out) {
  if (!out || !path) return fail(Errc::invalid_argument, "null argument");
  *out = nullptr;
  return guarded([&] { *out = new afx_config{affectfuse::config::Config::from_file(path)}; });
}

void afx_config_free(afx_config* cfg) { delete cfg; }

afx_status afx_config_set(afx_config* cfg, const char* key, const char* value) {
  if (!cfg || !key || !value) return fail(Errc::invalid_argument, "null argument");
  return guarded([&] { cfg->cfg.set(key, value); });
}

afx_status afx_config_override(afx_config* cfg, const char* assignment) {
  if (!cfg || !assignment) return fail(Errc::invalid_argument, "null argument");
  return guarded([&] { cfg->cfg.apply_override(assignment); });
}

afx_status afx_config_get(const afx_config* cfg, const char* key, char* buf, size_t cap, size_t* needed) {
  if (!cfg || !key) return fail(Errc::invalid_argument, "null argument");
  std::string value;
  const afx_status st = guarded([&] { value = cfg->cfg.get(key); });
  return st == AFX_OK ? copy_out(value, buf, cap, needed) : st;
}

afx_status afx_config_dump(const afx_config* cfg, char* buf, size_t cap, size_t* needed) {
  if (!cfg) return fail(Errc::invalid_argument, "null argument");
  std::string text;
  const afx_status st = guarded([&] { text = cfg->cfg.to_ini(); });
  return st == AFX_OK ? copy_out(text, buf, cap, needed) : st;
}

afx_status afx_run_command(const afx_config* cfg, const char* command, afx_result** out) {
  if (!cfg || !command || !out) return fail(Errc::invalid_argument, "null argument");
  *out = nullptr;
  return guarded([&] {
    auto r = affectfuse::commands::execute(cfg->cfg, command);
    *out = new afx_result{std::move(r.lines)};
  });
}

size_t afx_result_line_count(const afx_result* result) { return result ? result->lines.size() : 0; }

const char* afx_result_line(const afx_result* result, size_t index) {
  if (!result || index >= result->lines.size()) return nullptr;
  return result->lines[index].c_str();
}

void afx_result_free(afx_result* result) { delete result; }

afx_status afx_rmse(const double* pred, const double* truth, size_t n, double* out) {
  if (!out || (n > 0 && (!pred || !truth))) return fail(Errc::invalid_argument, "null argument");
  return guarded([&] { *out = affectfuse::eval::rmse({pred, n}, {truth, n}); });
}

afx_status afx_postprocess_track(const double* in, size_t n, int window, double* out) {
  if (n > 0 && (!in || !out)) return fail(Errc::invalid_argument, "null argument");
  return guarded([&] {
    const auto r = affectfuse::pipeline::postprocess_track({in, n}, window);
    std::copy(r.begin(), r.end(), out);
  });
}

afx_status afx_late_fuse_mean(const double* const* tracks, size_t count, size_t n, double* out) {
  if ((count > 0 && !tracks) || (n > 0 && !out)) return fail(Errc::invalid_argument, "null argument");
  return guarded([&] {
    std::vector<std::vector<double>> in;
    for (size_t i = 0; i < count; ++i) {
      if (!tracks[i] && n > 0) throw Error(Errc::invalid_argument, "null track");
      in.emplace_back(tracks[i], tracks[i] + n);
    }
    const auto r = affectfuse::pipeline::late_fuse_mean(in);
    std::copy(r.begin(), r.end(), out);
  });
}

}  // extern "C"
