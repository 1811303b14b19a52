use super::network::Network;
use crate::error::{Error, Result};
use crate::layers::Layer;
use crate::numerics::Scalar;

pub const NEGATE_TAG: &str = "negate_first_layer";
pub const NEGATE_WEIGHTS_ONLY_TAG: &str = "negate_first_layer_weights_only";

/// Network whose first conv layer sees `pixel_max − x` exactly as the
/// original sees `x`: weights `w ↦ −w`, biases `b_k ↦ b_k + pixel_max·Σw_k`.
pub fn negate_first_layer<S: Scalar>(net: &Network<S>, pixel_max: f64) -> Result<Network<S>> {
    transform_first(net, NEGATE_TAG, Some(S::lit(pixel_max)))
}

/// Negates the first layer's weights and leaves its biases alone.
pub fn negate_first_layer_weights_only<S: Scalar>(net: &Network<S>) -> Result<Network<S>> {
    transform_first(net, NEGATE_WEIGHTS_ONLY_TAG, None)
}

fn transform_first<S: Scalar>(net: &Network<S>, tag: &str, pixel_max: Option<S>) -> Result<Network<S>> {
    let Some(Layer::Conv(conv)) = net.layers().first() else {
        return Err(Error::Structure("first layer is not convolutional".into()));
    };
    let (k, ..) = conv.kernel_dims();
    let sums: Vec<S> = (0..k).map(|i| conv.anchor(i).iter().copied().sum()).collect();
    let mut out = net.clone();
    let (w, b) = out.params_mut(0).expect("conv has parameters");
    w.iter_mut().for_each(|v| *v = -*v);
    if let Some(pm) = pixel_max {
        for (bk, s) in b.iter_mut().zip(sums) {
            *bk += pm * s;
        }
    }
    out.meta.push_transform(tag);
    Ok(out)
}
