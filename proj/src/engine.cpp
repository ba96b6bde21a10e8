#include "engine.hpp"

#include "error.hpp"

namespace latentsearch::service {

namespace {

store::StoreOptions store_options(const EngineConfig& config, int dim) {
  store::StoreOptions opts;
  opts.dim = dim;
  if (config.embed_codec) opts.default_codec = *config.embed_codec;
  opts.rebuild_interval = config.rebuild_interval;
  return opts;
}

}  // namespace

Model::Model(weights::ModelWeights w)
    : config_(w.config),
      codec_(std::move(w.codec), std::move(w.priors), w.config.model_id),
      adapter_(std::move(w.adapter)) {
  adapter_.validate();
  require(adapter_.latent_channels() == codec_.weights().latent_channels(), ErrorCode::kModelMismatch,
          "adapter expects " + std::to_string(adapter_.latent_channels()) + " latent channels, codec emits " +
              std::to_string(codec_.weights().latent_channels()));
}

Model Model::load(const std::filesystem::path& archive) {
  return Model(weights::from_archive(weights::WeightArchive::load(archive)));
}

codec::EncodeResult Model::compress(const image_io::RgbImage& image) const {
  require(image.width <= codec::kMaxImageSide && image.height <= codec::kMaxImageSide,
          ErrorCode::kInvalidArgument,
          "image " + std::to_string(image.width) + "x" + std::to_string(image.height) + " exceeds " +
              std::to_string(codec::kMaxImageSide) + " pixels per side");
  return codec_.encode(image_io::to_tensor(image));
}

Analysis Model::analyze(const image_io::RgbImage& image) const {
  require(image.width >= kMinSearchSide && image.height >= kMinSearchSide, ErrorCode::kInvalidArgument,
          "image " + std::to_string(image.width) + "x" + std::to_string(image.height) +
              " is below the " + std::to_string(kMinSearchSide) + "-pixel minimum side");
  Analysis out;
  out.encoded = compress(image);
  out.bitstream = codec::serialize(out.encoded.bitstream);
  out.embedding = adapter::embed_latent(out.encoded.y_hat, adapter_);
  return out;
}

Analysis Model::analyze(std::span<const uint8_t> image_bytes) const {
  return analyze(image_io::decode_image(image_bytes));
}

image_io::RgbImage Model::decompress(std::span<const uint8_t> licb) const {
  return image_io::from_tensor(codec_.decode(licb).reconstruction);
}

adapter::Embedding Model::embed_bitstream(std::span<const uint8_t> licb) const {
  return adapter::embed_latent(codec_.decode(licb).y_hat, adapter_);
}

Engine::Engine(const EngineConfig& config)
    : model_(std::make_unique<Model>(Model::load(config.weights_path))),
      db_(std::make_unique<store::UnifiedDb>(config.db_path, store_options(config, model_->config().embed_dim))),
      ingest_codec_(config.embed_codec),
      index_(retrieval::build_index(*db_, &build_summary_)) {}

std::size_t Engine::index_size() const {
  std::shared_lock lock(index_mu_);
  return index_.size();
}

IngestResult Engine::ingest(std::span<const uint8_t> image_bytes, std::optional<store::EmbedCodec> codec) {
  const Analysis a = model_->analyze(image_bytes);
  std::lock_guard serial(ingest_mu_);
  const uint64_t id = db_->put(a.bitstream, a.embedding.values(), codec ? codec : ingest_codec_);
  // The index row is the stored (fixed-point) embedding, same as a rebuild.
  const store::ImageRecord rec = db_->get(id);
  {
    std::unique_lock lock(index_mu_);
    index_.add(id, rec.embedding);
  }
  return {id, a.encoded.stats.bpp, a.encoded.stats.psnr};
}

retrieval::SearchResult Engine::search(std::span<const float> embedding, const retrieval::QueryParams& params) const {
  std::shared_lock lock(index_mu_);
  return index_.search(embedding, params);
}

QueryResult Engine::query(std::span<const uint8_t> image_bytes, const retrieval::QueryParams& params) const {
  params.validate();
  Analysis a = model_->analyze(image_bytes);
  QueryResult out;
  out.search = search(a.embedding.values(), params);
  out.bpp = a.encoded.stats.bpp;
  out.bitstream = std::move(a.bitstream);
  out.embedding = std::move(a.embedding);
  return out;
}

std::vector<uint8_t> Engine::fetch(uint64_t id, bool decode) const {
  store::ImageRecord rec = db_->get(id);
  if (!decode) return std::move(rec.bitstream);
  return image_io::encode_png(model_->decompress(rec.bitstream));
}

store::DbStats Engine::stats() const { return db_->stats(); }

}  // namespace latentsearch::service
