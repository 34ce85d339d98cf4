#include <gtest/gtest.h>

#include "mvgc/data/tu_dataset.hpp"
#include "mvgc/train/gradcheck.hpp"
#include "mvgc/train/trainer.hpp"

TEST(Smoke, MutagForwardBackward) {
    auto raw = mvgc::load_tu_dataset(MVGC_SOURCE_DIR "/data", "MUTAG");
    auto data = mvgc::encode(raw, mvgc::feature_encoding::label_onehot, 50);
    mvgc::rng gen(1);
    mvgc::train_config tc;
    auto m = mvgc::init_model(mvgc::make_model_config(tc, data.feature_dim, data.num_classes), gen);
    auto r = mvgc::compute_gradients(m, data.graphs[0], gen);
    EXPECT_TRUE(std::isfinite(r.loss));
}
