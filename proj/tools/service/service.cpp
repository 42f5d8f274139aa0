#include "service.hpp"

#include <chrono>
#include <optional>
#include <string>
#include <vector>

#include <boost/beast/core/detail/base64.hpp>
#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "maskforge/mask_extract.hpp"
#include "maskforge/png_io.hpp"
#include "maskforge/video.hpp"
#include "tooling.hpp"

namespace maskforge::service {
namespace {

using nlohmann::json;
namespace b64 = boost::beast::detail::base64;

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
    std::string out(b64::encoded_size(bytes.size()), '\0');
    out.resize(b64::encode(out.data(), bytes.data(), bytes.size()));
    return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
    if (const auto comma = text.find(','); text.starts_with("data:") && comma != std::string_view::npos) {
        text.remove_prefix(comma + 1);
    }
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) {
        text.remove_suffix(1);
    }
    // beast stops at padding without counting it as read.
    for (int pad = 0; pad < 2 && text.ends_with('='); ++pad) {
        text.remove_suffix(1);
    }
    std::vector<std::uint8_t> out(b64::decoded_size(text.size() + 3));
    const auto [written, read] = b64::decode(out.data(), text.data(), text.size());
    if (read != text.size()) {
        throw Error(ErrorCode::decode, "invalid base64 payload");
    }
    out.resize(written);
    return out;
}

int status_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::not_found:
            return 404;
        case ErrorCode::missing_region:
        case ErrorCode::empty_mask:
        case ErrorCode::degenerate_geometry:
            return 422;
        default:
            return 400;
    }
}

void send_error(httplib::Response& res, int status, std::string_view error, const std::string& reason) {
    res.status = status;
    res.set_content(json{{"error", error}, {"reason", reason}}.dump(), "application/json");
}

/// Named request fields from either a multipart form or a JSON body in which
/// images are base64 strings.
class Payload {
public:
    explicit Payload(const httplib::Request& req) : req_(req) {
        if (!req.is_multipart_form_data() && !req.body.empty()) {
            try {
                body_ = json::parse(req.body);
            } catch (const json::parse_error& e) {
                throw Error(ErrorCode::decode, std::string("request body is not JSON: ") + e.what());
            }
            if (!body_.is_object()) {
                throw Error(ErrorCode::decode, "request body must be a JSON object");
            }
        }
    }

    std::optional<std::vector<std::uint8_t>> bytes(const std::string& name) const {
        if (req_.has_file(name)) {
            const auto& content = req_.get_file_value(name).content;
            return std::vector<std::uint8_t>(content.begin(), content.end());
        }
        if (body_.contains(name)) {
            if (!body_[name].is_string()) {
                throw Error(ErrorCode::decode, name + " must be a base64 string");
            }
            return base64_decode(body_[name].get_ref<const std::string&>());
        }
        return std::nullopt;
    }

    std::vector<std::uint8_t> required_bytes(const std::string& name) const {
        auto b = bytes(name);
        if (!b) {
            throw Error(ErrorCode::invalid_argument, "missing field: " + name);
        }
        return *std::move(b);
    }

    std::optional<json> object(const std::string& name) const {
        try {
            if (req_.has_file(name)) {
                return std::optional<json>(std::in_place, json::parse(req_.get_file_value(name).content));
            }
            if (body_.contains(name)) {
                const json& v = body_[name];
                return std::optional<json>(std::in_place, v.is_string() ? json::parse(v.get<std::string>()) : v);
            }
        } catch (const json::parse_error& e) {
            throw Error(ErrorCode::decode, name + ": " + e.what());
        }
        return std::nullopt;
    }

    const json& body() const { return body_; }

private:
    const httplib::Request& req_;
    json body_ = json::object();
};

LandmarkSet landmarks_field(const Payload& p) {
    const auto j = p.object("landmarks");
    if (!j) {
        throw Error(ErrorCode::invalid_argument, "missing field: landmarks");
    }
    return parse_landmarks_json(j->dump());
}

void send_png(httplib::Response& res, const std::vector<std::uint8_t>& png) {
    res.status = 200;
    res.set_content(std::string(png.begin(), png.end()), "image/png");
}

template <typename Handler>
httplib::Server::Handler guarded(Handler handler) {
    return [handler](const httplib::Request& req, httplib::Response& res) {
        try {
            handler(req, res);
        } catch (const Error& e) {
            send_error(res, status_for(e.code()), to_string(e.code()), e.what());
        } catch (const json::exception& e) {
            send_error(res, 400, "decode", e.what());
        } catch (const std::exception& e) {
            spdlog::error("{} {}: {}", req.method, req.path, e.what());
            send_error(res, 500, "internal", e.what());
        }
    };
}

RegionSet regions_from(const json& j) {
    if (j.is_string()) {
        return tooling::parse_regions(j.get<std::string>());
    }
    std::string list;
    for (const auto& r : j) {
        list += r.get<std::string>() + ",";
    }
    return tooling::parse_regions(list);
}

}  // namespace

void install_routes(httplib::Server& server, std::shared_ptr<const ServiceState> state) {
    server.set_payload_max_length(kMaxPayloadBytes);

    server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) { res.set_content("ok", "text/plain"); });

    server.Get("/v1/styles", guarded([state](const httplib::Request&, httplib::Response& res) {
        const StyleLibrary& lib = state->library;
        json templates = json::array();
        for (const auto& t : lib.templates) {
            templates.push_back({{"id", t.id}, {"region", to_string(t.region)}});
        }
        json palettes = json::object();
        json finishes = json::object();
        for (const MakeupRegion r : kAllRegions) {
            const std::string name(to_string(r));
            for (const Rgb& c : lib.palette_for(r)) {
                palettes[name].push_back(tooling::hex_color(c));
            }
            for (const Finish f : lib.finishes_for(r)) {
                finishes[name].push_back(to_string(f));
            }
        }
        const Size frame = lib.frame();
        res.set_content(json{{"count", lib.templates.size()},
                             {"templates", templates},
                             {"palettes", palettes},
                             {"finishes", finishes},
                             {"opacity_range", {lib.opacity_min, lib.opacity_max}},
                             {"frame", {frame.width, frame.height}}}
                            .dump(),
                        "application/json");
    }));

    server.Post("/v1/synthesize", guarded([state](const httplib::Request& req, httplib::Response& res) {
        const Payload p(req);
        const json& body = p.body();
        MakeupStyle style;
        if (body.contains("style")) {
            style = tooling::style_from_json(body["style"]);
        } else {
            const RegionSet regions = body.contains("regions") ? regions_from(body["regions"]) : RegionSet::all();
            style = sample_style(state->library, body.value("seed", std::uint64_t{0}), regions);
        }
        const RgbaMask mask = render_style_mask(style, state->library, state->canon);
        res.set_header("X-Style", tooling::style_json(style).dump());
        send_png(res, encode_png(to_raw(mask)));
    }));

    server.Post("/v1/extract", guarded([state](const httplib::Request& req, httplib::Response& res) {
        const Payload p(req);
        const ImageRgb photo = to_rgb(decode_png(p.required_bytes("photo")));
        const LandmarkSet lm = landmarks_field(p);
        const LabelMap parsing = to_labels(decode_png(p.required_bytes("parsing")));
        ExtractOptions options;
        if (const auto params = p.object("params")) {
            options = tooling::extract_options_from_json(*params);
        }
        options.clusters.validate();
        const auto t0 = std::chrono::steady_clock::now();
        const EyeExtraction ex = extract_eye_mask(photo, lm, parsing, state->labels, options, state->canon);
        const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        const json stats = tooling::extraction_stats(ex, ms);
        const auto png = encode_png(to_raw(ex.mask));
        if (req.get_param_value("format") == "json") {
            res.set_content(json{{"mask_png", base64_encode(png)}, {"stats", stats}}.dump(), "application/json");
            return;
        }
        res.set_header("X-Mask-Stats", stats.dump());
        send_png(res, png);
    }));

    server.Post("/v1/apply", guarded([state](const httplib::Request& req, httplib::Response& res) {
        const Payload p(req);
        const RgbaMask mask = to_rgba(decode_png(p.required_bytes("mask")));
        FrameInput frame;
        frame.image = to_rgb(decode_png(p.required_bytes("frame")));
        frame.landmarks = landmarks_field(p);
        if (const auto parsing = p.bytes("parsing")) {
            frame.parsing = to_labels(decode_png(*parsing));
        }
        ApplyOptions options;
        options.face_labels = state->labels.set_of(state->labels.face);
        if (const auto o = p.object("options")) {
            options.alpha_scale = o->value("alpha_scale", options.alpha_scale);
            options.gate = o->value("gate", options.gate);
            options.warp.grid_step = o->value("grid_step", options.warp.grid_step);
        }
        if (!(options.alpha_scale >= 0.0 && options.alpha_scale <= 2.0)) {
            throw Error(ErrorCode::invalid_argument, "alpha_scale must lie in [0, 2]");
        }
        const CanonicalLayout canon = tooling::canon_for_mask(state->canon, mask.size());
        const ApplyResult r = apply_to_frame(mask, frame, canon, options);
        if (!r.warning.empty()) {
            std::string text = r.warning;
            for (char& c : text) {
                if (c == '"' || c == '\n' || c == '\r') {
                    c = '\'';
                }
            }
            res.set_header("Warning", "199 maskforge \"" + text + "\"");
        }
        res.set_header("X-Applied", r.applied ? "true" : "false");
        send_png(res, encode_png(to_raw(r.image)));
    }));
}

}  // namespace maskforge::service
