//! The two networks and their wiring into embed/extract pipelines.
//!
//! The preprocess model is a three-stage strided-convolution feature
//! extractor applied to every image before embedding or extraction. The
//! operational model is a ResNet-style transposed-convolution decoder that
//! renders an image from a 128-channel feature map. Embedding runs two
//! preprocess passes (secret, then cover), merges the feature maps, and
//! decodes a stego image; extraction runs one preprocess pass on the
//! stego image and decodes the hidden image. The embedding and extraction
//! decoders share one architecture with independent parameters.

use crate::autodiff::{NodeId, Tape};
use crate::error::{Error, Result};
use crate::image_io::{image_from_batch, stack_batch, ImageTensor};
use crate::layers::{BatchNorm2d, Conv2d, ConvTranspose2d};
use crate::param::{ParamModule, Parameter};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Negative-side slope of the decoder's LeakyReLU activations.
pub const LEAKY_SLOPE: f64 = 0.2;

/// Feature channels entering the operational model.
pub const MERGED_CHANNELS: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PreprocessVariant {
    Embedding,
    Extraction,
}

impl PreprocessVariant {
    /// Filter counts of the three convolution stages.
    pub fn filters(self) -> [usize; 3] {
        match self {
            PreprocessVariant::Embedding => [16, 32, 64],
            PreprocessVariant::Extraction => [32, 64, 128],
        }
    }
}

/// Three stages of conv(k3, s2, p1) -> ReLU, with batch norm on the
/// middle stage only. Spatial dims halve per stage, so the output is
/// the input downsampled by 8 with 64 (embedding) or 128 (extraction)
/// channels.
pub struct PreprocessModel<T> {
    pub variant: PreprocessVariant,
    conv1: Conv2d<T>,
    conv2: Conv2d<T>,
    bn2: BatchNorm2d<T>,
    conv3: Conv2d<T>,
}

impl<T: Scalar> PreprocessModel<T> {
    pub fn new(prefix: &str, variant: PreprocessVariant, rng: &mut ChaCha8Rng) -> Self {
        let [f1, f2, f3] = variant.filters();
        PreprocessModel {
            variant,
            conv1: Conv2d::new(&format!("{prefix}.conv1"), 3, f1, 3, 2, 1, rng),
            conv2: Conv2d::new(&format!("{prefix}.conv2"), f1, f2, 3, 2, 1, rng),
            bn2: BatchNorm2d::new(&format!("{prefix}.bn2"), f2),
            conv3: Conv2d::new(&format!("{prefix}.conv3"), f2, f3, 3, 2, 1, rng),
        }
    }

    pub fn out_channels(&self) -> usize {
        self.variant.filters()[2]
    }

    fn check_input(&self, tape: &Tape<T>, x: NodeId) -> Result<()> {
        let (_, c, h, w) = tape.value(x).dims4("preprocess input")?;
        if c != 3 {
            return Err(Error::shape(
                "preprocess",
                format!("expected 3-channel input, got {c}"),
            ));
        }
        if !h.is_multiple_of(8) || !w.is_multiple_of(8) {
            return Err(Error::shape(
                "preprocess",
                format!(
                    "spatial dims {h}x{w} must be divisible by 8; resize the image to a \
                     multiple of 8 first"
                ),
            ));
        }
        Ok(())
    }

    /// Stage order follows conv -> ReLU -> BN, with BN on stage 2 only.
    pub fn forward_train(&mut self, tape: &mut Tape<T>, x: NodeId) -> Result<NodeId> {
        self.check_input(tape, x)?;
        let y = self.conv1.forward(tape, x)?;
        let y = tape.relu(y);
        let y = self.conv2.forward(tape, y)?;
        let y = tape.relu(y);
        let y = self.bn2.forward_train(tape, y)?;
        let y = self.conv3.forward(tape, y)?;
        Ok(tape.relu(y))
    }

    pub fn forward_eval(&self, tape: &mut Tape<T>, x: NodeId) -> Result<NodeId> {
        self.check_input(tape, x)?;
        let y = self.conv1.forward(tape, x)?;
        let y = tape.relu(y);
        let y = self.conv2.forward(tape, y)?;
        let y = tape.relu(y);
        let y = self.bn2.forward_eval(tape, y)?;
        let y = self.conv3.forward(tape, y)?;
        Ok(tape.relu(y))
    }

    pub fn describe(&self) -> PreprocessDesc {
        PreprocessDesc {
            variant: self.variant,
            filters: self.variant.filters().to_vec(),
            kernel: 3,
            stride: 2,
            padding: 1,
            activation_order: "conv-relu-bn".to_string(),
            batch_norm_stages: vec![false, true, false],
        }
    }

    pub fn visit_buffers(&self, f: &mut dyn FnMut(&str, &Tensor<T>)) {
        self.bn2.visit_buffers(f);
    }

    pub fn visit_buffers_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        self.bn2.visit_buffers_mut(f);
    }
}

impl<T: Scalar> ParamModule<T> for PreprocessModel<T> {
    fn visit_params(&self, f: &mut dyn FnMut(&Parameter<T>)) {
        self.conv1.visit_params(f);
        self.conv2.visit_params(f);
        self.bn2.visit_params(f);
        self.conv3.visit_params(f);
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Parameter<T>)) {
        self.conv1.visit_params_mut(f);
        self.conv2.visit_params_mut(f);
        self.bn2.visit_params_mut(f);
        self.conv3.visit_params_mut(f);
    }
}

/// conv_transpose(k3, s1, p1, channels preserved) -> BN -> LeakyReLU,
/// added elementwise to the unit input.
struct ResidualUnit<T> {
    convt: ConvTranspose2d<T>,
    bn: BatchNorm2d<T>,
}

impl<T: Scalar> ResidualUnit<T> {
    fn new(prefix: &str, channels: usize, rng: &mut ChaCha8Rng) -> Self {
        ResidualUnit {
            convt: ConvTranspose2d::new(&format!("{prefix}.convt"), channels, channels, 3, 1, 1, rng),
            bn: BatchNorm2d::new(&format!("{prefix}.bn"), channels),
        }
    }

    fn forward_train(&mut self, tape: &mut Tape<T>, x: NodeId) -> Result<NodeId> {
        let y = self.convt.forward(tape, x)?;
        let y = self.bn.forward_train(tape, y)?;
        let y = tape.leaky_relu(y, T::from_f64_lossy(LEAKY_SLOPE));
        tape.add(y, x)
    }

    fn forward_eval(&self, tape: &mut Tape<T>, x: NodeId) -> Result<NodeId> {
        let y = self.convt.forward(tape, x)?;
        let y = self.bn.forward_eval(tape, y)?;
        let y = tape.leaky_relu(y, T::from_f64_lossy(LEAKY_SLOPE));
        tape.add(y, x)
    }
}

/// conv_transpose(k4, s2, p1) -> BN -> LeakyReLU; doubles the spatial
/// dims and halves the channels.
struct UpsampleStage<T> {
    convt: ConvTranspose2d<T>,
    bn: BatchNorm2d<T>,
}

impl<T: Scalar> UpsampleStage<T> {
    fn new(prefix: &str, in_channels: usize, out_channels: usize, rng: &mut ChaCha8Rng) -> Self {
        UpsampleStage {
            convt: ConvTranspose2d::new(
                &format!("{prefix}.convt"),
                in_channels,
                out_channels,
                4,
                2,
                1,
                rng,
            ),
            bn: BatchNorm2d::new(&format!("{prefix}.bn"), out_channels),
        }
    }

    fn forward_train(&mut self, tape: &mut Tape<T>, x: NodeId) -> Result<NodeId> {
        let y = self.convt.forward(tape, x)?;
        let y = self.bn.forward_train(tape, y)?;
        Ok(tape.leaky_relu(y, T::from_f64_lossy(LEAKY_SLOPE)))
    }

    fn forward_eval(&self, tape: &mut Tape<T>, x: NodeId) -> Result<NodeId> {
        let y = self.convt.forward(tape, x)?;
        let y = self.bn.forward_eval(tape, y)?;
        Ok(tape.leaky_relu(y, T::from_f64_lossy(LEAKY_SLOPE)))
    }
}

/// Seven transposed convolutions: three (residual unit, upsampling
/// stage) pairs walking the channels 128 -> 64 -> 32 -> 16, then an
/// output layer (k3, s1, p1, 16 -> 3) squashed by a sigmoid. No batch
/// norm on the output layer.
pub struct OperationalModel<T> {
    res1: ResidualUnit<T>,
    up1: UpsampleStage<T>,
    res2: ResidualUnit<T>,
    up2: UpsampleStage<T>,
    res3: ResidualUnit<T>,
    up3: UpsampleStage<T>,
    output: ConvTranspose2d<T>,
}

impl<T: Scalar> OperationalModel<T> {
    pub fn new(prefix: &str, rng: &mut ChaCha8Rng) -> Self {
        OperationalModel {
            res1: ResidualUnit::new(&format!("{prefix}.res1"), 128, rng),
            up1: UpsampleStage::new(&format!("{prefix}.up1"), 128, 64, rng),
            res2: ResidualUnit::new(&format!("{prefix}.res2"), 64, rng),
            up2: UpsampleStage::new(&format!("{prefix}.up2"), 64, 32, rng),
            res3: ResidualUnit::new(&format!("{prefix}.res3"), 32, rng),
            up3: UpsampleStage::new(&format!("{prefix}.up3"), 32, 16, rng),
            output: ConvTranspose2d::new(&format!("{prefix}.out"), 16, 3, 3, 1, 1, rng),
        }
    }

    fn check_input(&self, tape: &Tape<T>, x: NodeId) -> Result<()> {
        let (_, c, _, _) = tape.value(x).dims4("operational input")?;
        if c != MERGED_CHANNELS {
            return Err(Error::shape(
                "operational model",
                format!("expected {MERGED_CHANNELS}-channel feature map, got {c}"),
            ));
        }
        Ok(())
    }

    pub fn forward_train(&mut self, tape: &mut Tape<T>, x: NodeId) -> Result<NodeId> {
        self.check_input(tape, x)?;
        let y = self.res1.forward_train(tape, x)?;
        let y = self.up1.forward_train(tape, y)?;
        let y = self.res2.forward_train(tape, y)?;
        let y = self.up2.forward_train(tape, y)?;
        let y = self.res3.forward_train(tape, y)?;
        let y = self.up3.forward_train(tape, y)?;
        let y = self.output.forward(tape, y)?;
        Ok(tape.sigmoid(y))
    }

    pub fn forward_eval(&self, tape: &mut Tape<T>, x: NodeId) -> Result<NodeId> {
        self.check_input(tape, x)?;
        let y = self.res1.forward_eval(tape, x)?;
        let y = self.up1.forward_eval(tape, y)?;
        let y = self.res2.forward_eval(tape, y)?;
        let y = self.up2.forward_eval(tape, y)?;
        let y = self.res3.forward_eval(tape, y)?;
        let y = self.up3.forward_eval(tape, y)?;
        let y = self.output.forward(tape, y)?;
        Ok(tape.sigmoid(y))
    }

    pub fn describe(&self) -> OperationalDesc {
        let mut layers = Vec::new();
        for (role, convt, bn) in [
            ("residual", &self.res1.convt, true),
            ("upsample", &self.up1.convt, true),
            ("residual", &self.res2.convt, true),
            ("upsample", &self.up2.convt, true),
            ("residual", &self.res3.convt, true),
            ("upsample", &self.up3.convt, true),
            ("output", &self.output, false),
        ] {
            layers.push(OmLayerDesc {
                role: role.to_string(),
                in_channels: convt.in_channels,
                out_channels: convt.out_channels,
                kernel: convt.kernel,
                stride: convt.stride,
                padding: convt.padding,
                batch_norm: bn,
            });
        }
        OperationalDesc {
            input_channels: MERGED_CHANNELS,
            layers,
            residual_shortcuts: 3,
            activation_order: "convt-bn-leakyrelu".to_string(),
            leaky_slope: LEAKY_SLOPE,
            output_activation: "sigmoid".to_string(),
        }
    }

    pub fn visit_buffers(&self, f: &mut dyn FnMut(&str, &Tensor<T>)) {
        self.res1.bn.visit_buffers(f);
        self.up1.bn.visit_buffers(f);
        self.res2.bn.visit_buffers(f);
        self.up2.bn.visit_buffers(f);
        self.res3.bn.visit_buffers(f);
        self.up3.bn.visit_buffers(f);
    }

    pub fn visit_buffers_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        self.res1.bn.visit_buffers_mut(f);
        self.up1.bn.visit_buffers_mut(f);
        self.res2.bn.visit_buffers_mut(f);
        self.up2.bn.visit_buffers_mut(f);
        self.res3.bn.visit_buffers_mut(f);
        self.up3.bn.visit_buffers_mut(f);
    }
}

impl<T: Scalar> ParamModule<T> for OperationalModel<T> {
    fn visit_params(&self, f: &mut dyn FnMut(&Parameter<T>)) {
        self.res1.convt.visit_params(f);
        self.res1.bn.visit_params(f);
        self.up1.convt.visit_params(f);
        self.up1.bn.visit_params(f);
        self.res2.convt.visit_params(f);
        self.res2.bn.visit_params(f);
        self.up2.convt.visit_params(f);
        self.up2.bn.visit_params(f);
        self.res3.convt.visit_params(f);
        self.res3.bn.visit_params(f);
        self.up3.convt.visit_params(f);
        self.up3.bn.visit_params(f);
        self.output.visit_params(f);
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Parameter<T>)) {
        self.res1.convt.visit_params_mut(f);
        self.res1.bn.visit_params_mut(f);
        self.up1.convt.visit_params_mut(f);
        self.up1.bn.visit_params_mut(f);
        self.res2.convt.visit_params_mut(f);
        self.res2.bn.visit_params_mut(f);
        self.up2.convt.visit_params_mut(f);
        self.up2.bn.visit_params_mut(f);
        self.res3.convt.visit_params_mut(f);
        self.res3.bn.visit_params_mut(f);
        self.up3.convt.visit_params_mut(f);
        self.up3.bn.visit_params_mut(f);
        self.output.visit_params_mut(f);
    }
}

/// Channel-wise concatenation of the preprocess outputs, secret features
/// first. The order is fixed: checkpoints depend on it.
pub fn merge_features<T: Scalar>(
    tape: &mut Tape<T>,
    secret_features: NodeId,
    cover_features: NodeId,
) -> Result<NodeId> {
    if tape.value(secret_features).shape() != tape.value(cover_features).shape() {
        return Err(Error::shape(
            "merge_features",
            format!(
                "{:?} vs {:?}",
                tape.value(secret_features).shape(),
                tape.value(cover_features).shape()
            ),
        ));
    }
    tape.concat_channels(secret_features, cover_features)
}

/// `alpha * mse(cover, stego) + (1 - alpha) * mse(secret, extracted)`
/// as tape nodes.
pub fn total_loss_nodes<T: Scalar>(
    tape: &mut Tape<T>,
    mse_cover_stego: NodeId,
    mse_secret_extracted: NodeId,
    alpha: f64,
) -> Result<NodeId> {
    check_alpha(alpha)?;
    let a = tape.scale(mse_cover_stego, T::from_f64_lossy(alpha));
    let b = tape.scale(mse_secret_extracted, T::from_f64_lossy(1.0 - alpha));
    tape.add(a, b)
}

pub fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) || alpha.is_nan() {
        return Err(Error::InvalidArg(format!(
            "alpha must be in [0, 1], got {alpha}"
        )));
    }
    Ok(())
}

/// Mean squared error between two equal-shaped float images.
pub fn mse_images<T: Scalar>(a: &ImageTensor<T>, b: &ImageTensor<T>) -> Result<f64> {
    if a.height() != b.height() || a.width() != b.width() {
        return Err(Error::shape(
            "mse",
            format!(
                "{}x{} vs {}x{}",
                a.height(),
                a.width(),
                b.height(),
                b.width()
            ),
        ));
    }
    let acc: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x.to_f64_lossy() - y.to_f64_lossy();
            d * d
        })
        .sum();
    Ok(acc / a.data().len() as f64)
}

/// Weighted training loss evaluated on images (no gradients).
pub fn total_loss_images<T: Scalar>(
    cover: &ImageTensor<T>,
    stego: &ImageTensor<T>,
    secret: &ImageTensor<T>,
    extracted: &ImageTensor<T>,
    alpha: f64,
) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(alpha * mse_images(cover, stego)? + (1.0 - alpha) * mse_images(secret, extracted)?)
}

/// Intermediate nodes of one training forward pass.
pub struct TrainStepNodes {
    pub stego: NodeId,
    pub extracted: NodeId,
    pub mse_cover_stego: NodeId,
    pub mse_secret_extracted: NodeId,
    pub loss: NodeId,
}

/// The full system: two preprocess models and two operational models
/// with independent parameters, plus the loss weight alpha.
pub struct StegoSystem<T> {
    pub prep_embed: PreprocessModel<T>,
    pub prep_extract: PreprocessModel<T>,
    pub om_embed: OperationalModel<T>,
    pub om_extract: OperationalModel<T>,
    pub alpha: f64,
}

impl<T: Scalar> StegoSystem<T> {
    /// Seeded initialization; the same seed reproduces the same weights.
    pub fn new(alpha: f64, seed: u64) -> Result<Self> {
        check_alpha(alpha)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(StegoSystem {
            prep_embed: PreprocessModel::new("prep_embed", PreprocessVariant::Embedding, &mut rng),
            prep_extract: PreprocessModel::new(
                "prep_extract",
                PreprocessVariant::Extraction,
                &mut rng,
            ),
            om_embed: OperationalModel::new("om_embed", &mut rng),
            om_extract: OperationalModel::new("om_extract", &mut rng),
            alpha,
        })
    }

    /// Embedding forward over batched tensors: preprocess secret and
    /// cover (in that order), merge, decode.
    pub fn embed_nodes_train(
        &mut self,
        tape: &mut Tape<T>,
        cover: NodeId,
        secret: NodeId,
    ) -> Result<NodeId> {
        let s_feat = self.prep_embed.forward_train(tape, secret)?;
        let c_feat = self.prep_embed.forward_train(tape, cover)?;
        let merged = merge_features(tape, s_feat, c_feat)?;
        self.om_embed.forward_train(tape, merged)
    }

    pub fn embed_nodes_eval(
        &self,
        tape: &mut Tape<T>,
        cover: NodeId,
        secret: NodeId,
    ) -> Result<NodeId> {
        let s_feat = self.prep_embed.forward_eval(tape, secret)?;
        let c_feat = self.prep_embed.forward_eval(tape, cover)?;
        let merged = merge_features(tape, s_feat, c_feat)?;
        self.om_embed.forward_eval(tape, merged)
    }

    pub fn extract_nodes_train(&mut self, tape: &mut Tape<T>, stego: NodeId) -> Result<NodeId> {
        let feat = self.prep_extract.forward_train(tape, stego)?;
        self.om_extract.forward_train(tape, feat)
    }

    pub fn extract_nodes_eval(&self, tape: &mut Tape<T>, stego: NodeId) -> Result<NodeId> {
        let feat = self.prep_extract.forward_eval(tape, stego)?;
        self.om_extract.forward_eval(tape, feat)
    }

    /// One differentiable training pass: embed, feed the stego tensor
    /// straight into extraction, and form the weighted loss. No
    /// quantization happens inside this graph.
    pub fn training_step_nodes(
        &mut self,
        tape: &mut Tape<T>,
        covers: Tensor<T>,
        secrets: Tensor<T>,
    ) -> Result<TrainStepNodes> {
        if covers.shape() != secrets.shape() {
            return Err(Error::shape(
                "training batch",
                format!("covers {:?} vs secrets {:?}", covers.shape(), secrets.shape()),
            ));
        }
        let c = tape.constant(covers);
        let s = tape.constant(secrets);
        let stego = self.embed_nodes_train(tape, c, s)?;
        let extracted = self.extract_nodes_train(tape, stego)?;
        let mse_cover_stego = tape.mse(c, stego)?;
        let mse_secret_extracted = tape.mse(s, extracted)?;
        let loss = total_loss_nodes(tape, mse_cover_stego, mse_secret_extracted, self.alpha)?;
        Ok(TrainStepNodes {
            stego,
            extracted,
            mse_cover_stego,
            mse_secret_extracted,
            loss,
        })
    }

    /// Hide `secret` inside `cover` (inference mode, single image).
    pub fn embed_images(
        &self,
        cover: &ImageTensor<T>,
        secret: &ImageTensor<T>,
    ) -> Result<ImageTensor<T>> {
        if cover.height() != secret.height() || cover.width() != secret.width() {
            return Err(Error::shape(
                "embed",
                format!(
                    "cover {}x{} vs secret {}x{}",
                    cover.height(),
                    cover.width(),
                    secret.height(),
                    secret.width()
                ),
            ));
        }
        let mut tape = Tape::new();
        let c = tape.constant(stack_batch(&[cover])?);
        let s = tape.constant(stack_batch(&[secret])?);
        let stego = self.embed_nodes_eval(&mut tape, c, s)?;
        image_from_batch(tape.value(stego), 0)
    }

    /// Recover the hidden image from a stego image (inference mode).
    pub fn extract_images(&self, stego: &ImageTensor<T>) -> Result<ImageTensor<T>> {
        let mut tape = Tape::new();
        let h = tape.constant(stack_batch(&[stego])?);
        let e = self.extract_nodes_eval(&mut tape, h)?;
        image_from_batch(tape.value(e), 0)
    }

    pub fn describe(&self, image_size: usize) -> ArchDescriptor {
        ArchDescriptor {
            image_size,
            alpha: self.alpha,
            preprocess_embed: self.prep_embed.describe(),
            preprocess_extract: self.prep_extract.describe(),
            operational_embed: self.om_embed.describe(),
            operational_extract: self.om_extract.describe(),
        }
    }

    pub fn visit_buffers(&self, f: &mut dyn FnMut(&str, &Tensor<T>)) {
        self.prep_embed.visit_buffers(f);
        self.prep_extract.visit_buffers(f);
        self.om_embed.visit_buffers(f);
        self.om_extract.visit_buffers(f);
    }

    pub fn visit_buffers_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor<T>)) {
        self.prep_embed.visit_buffers_mut(f);
        self.prep_extract.visit_buffers_mut(f);
        self.om_embed.visit_buffers_mut(f);
        self.om_extract.visit_buffers_mut(f);
    }
}

impl<T: Scalar> ParamModule<T> for StegoSystem<T> {
    fn visit_params(&self, f: &mut dyn FnMut(&Parameter<T>)) {
        self.prep_embed.visit_params(f);
        self.prep_extract.visit_params(f);
        self.om_embed.visit_params(f);
        self.om_extract.visit_params(f);
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Parameter<T>)) {
        self.prep_embed.visit_params_mut(f);
        self.prep_extract.visit_params_mut(f);
        self.om_embed.visit_params_mut(f);
        self.om_extract.visit_params_mut(f);
    }
}

// ---- architecture descriptors ---------------------------------------------

/// Auditable architecture summary; stored in checkpoints and validated
/// on load.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchDescriptor {
    pub image_size: usize,
    pub alpha: f64,
    pub preprocess_embed: PreprocessDesc,
    pub preprocess_extract: PreprocessDesc,
    pub operational_embed: OperationalDesc,
    pub operational_extract: OperationalDesc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreprocessDesc {
    pub variant: PreprocessVariant,
    pub filters: Vec<usize>,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub activation_order: String,
    pub batch_norm_stages: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperationalDesc {
    pub input_channels: usize,
    pub layers: Vec<OmLayerDesc>,
    pub residual_shortcuts: usize,
    pub activation_order: String,
    pub leaky_slope: f64,
    pub output_activation: String,
}

impl OperationalDesc {
    pub fn transposed_conv_count(&self) -> usize {
        self.layers.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmLayerDesc {
    pub role: String,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub batch_norm: bool,
}
