import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(dout: np.ndarray, pre: np.ndarray) -> np.ndarray:
    return dout * (pre > 0)


def dense_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    return x @ w + b


def dense_backward(dout: np.ndarray, x: np.ndarray, w: np.ndarray):
    return dout @ w.T, x.T @ dout, dout.sum(axis=0)


def im2col(x: np.ndarray, kh: int, kw: int) -> np.ndarray:
    """Unfolds (n, c, h, w) into rows of (c*kh*kw) patches, one row per output pixel."""
    n, c = x.shape[:2]
    windows = sliding_window_view(x, (kh, kw), axis=(2, 3))
    ho, wo = windows.shape[2:4]
    return windows.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * kh * kw)


def conv2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """Valid, stride-1 convolution. Returns the output and the unfolded input for backward."""
    n, _, h, wd = x.shape
    o, _, kh, kw = w.shape
    ho, wo = h - kh + 1, wd - kw + 1
    cols = im2col(x, kh, kw)
    out = cols @ w.reshape(o, -1).T + b
    return out.reshape(n, ho, wo, o).transpose(0, 3, 1, 2), cols


def conv2d_backward(dout: np.ndarray, x_shape, cols: np.ndarray, w: np.ndarray, need_dx=True):
    n, c = x_shape[:2]
    o, _, kh, kw = w.shape
    ho, wo = dout.shape[2:]
    dy = dout.transpose(0, 2, 3, 1).reshape(-1, o)
    dw = (dy.T @ cols).reshape(w.shape)
    db = dy.sum(axis=0)
    if not need_dx:
        return None, dw, db

    dcols = (dy @ w.reshape(o, -1)).reshape(n, ho, wo, c, kh, kw)
    dx = np.zeros(x_shape)
    for i in range(kh):
        for j in range(kw):
            dx[:, :, i : i + ho, j : j + wo] += dcols[..., i, j].transpose(0, 3, 1, 2)
    return dx, dw, db


def maxpool_forward(x: np.ndarray):
    """2x2 max pooling with stride 2; odd trailing rows/columns are dropped."""
    n, c, h, w = x.shape
    ho, wo = h // 2, w // 2
    blocks = (
        x[:, :, : ho * 2, : wo * 2]
        .reshape(n, c, ho, 2, wo, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, ho, wo, 4)
    )
    arg = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, arg[..., None], axis=-1)[..., 0]
    return out, arg


def maxpool_backward(dout: np.ndarray, x_shape, arg: np.ndarray) -> np.ndarray:
    n, c, _, _ = x_shape
    ho, wo = dout.shape[2:]
    blocks = np.zeros((n, c, ho, wo, 4))
    np.put_along_axis(blocks, arg[..., None], dout[..., None], axis=-1)
    dx = np.zeros(x_shape)
    dx[:, :, : ho * 2, : wo * 2] = (
        blocks.reshape(n, c, ho, wo, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, ho * 2, wo * 2)
    )
    return dx


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy over the batch and its gradient with respect to the logits."""
    n = logits.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    rows = np.arange(n)
    loss = -log_probs[rows, labels].mean()
    dlogits = np.exp(log_probs)
    dlogits[rows, labels] -= 1.0
    return float(loss), dlogits / n
