# unmtlab/seq2seq.py
#
# One translation model serves both directions: a shared embedding table, a
# single-layer GRU encoder, a GRU decoder whose first input is the target
# language tag, dot-product attention over encoder states and a softmax output
# layer. Forward and backward passes are written out by hand in float64.

import hashlib
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Dict

import msgspec
import numpy as np

from unmtlab.errors import NumericError, ShapeMismatchError, SpecValidationError
from unmtlab.helpers import derive_rng
from unmtlab.models import Lang, ModelDims
from unmtlab.utils.corpus import BOS, EOS, LANG_IDS, PAD, UNK, lang_tag_id

SNAPSHOT_FORMAT_VERSION = 1
INIT_SCALE = 0.08
PARAM_NAMES = ('embed', 'enc_W', 'enc_U', 'enc_b', 'dec_W', 'dec_U', 'dec_b', 'out_W', 'out_b')

# never produced by the decoder
BANNED_OUTPUTS = (PAD, BOS, UNK) + tuple(sorted(LANG_IDS.values()))

NEG_INF = -1e9
DECODE_CHUNK = 256


def param_shapes(dims):
    V, E, H = dims.vocab_size, dims.embed_dim, dims.hidden_dim
    return {
        'embed': (V, E),
        'enc_W': (E, 3 * H),
        'enc_U': (H, 3 * H),
        'enc_b': (3 * H,),
        'dec_W': (E, 3 * H),
        'dec_U': (H, 3 * H),
        'dec_b': (3 * H,),
        'out_W': (2 * H, V),
        'out_b': (V,),
    }


def _freeze(arrays):
    frozen = {}
    for name in PARAM_NAMES:
        arr = np.array(arrays[name], dtype=np.float64, copy=True)
        arr.setflags(write=False)
        frozen[name] = arr
    return frozen


@dataclass(frozen=True, eq=False)
class ModelSnapshot:
    """Immutable parameter set of a translation model at an iteration boundary."""
    params: Dict[str, np.ndarray]
    dims: ModelDims
    step: int = 0

    def __post_init__(self):
        shapes = param_shapes(self.dims)
        missing = set(PARAM_NAMES) - set(self.params)
        if missing:
            raise ShapeMismatchError(sorted(missing)[0], shapes[sorted(missing)[0]], None)
        for name in PARAM_NAMES:
            if self.params[name].shape != shapes[name]:
                raise ShapeMismatchError(name, shapes[name], self.params[name].shape)
        object.__setattr__(self, 'params', _freeze(self.params))

    def writable_params(self):
        return {name: np.array(arr, copy=True) for name, arr in self.params.items()}

    def header(self):
        return {
            'format_version': SNAPSHOT_FORMAT_VERSION,
            'dims': self.dims.model_dump(),
            'step': self.step,
        }

    @cached_property
    def model_id(self):
        digest = hashlib.sha256(msgspec.json.encode(self.header(), order='sorted'))
        for name in PARAM_NAMES:
            digest.update(name.encode('utf-8'))
            digest.update(np.ascontiguousarray(self.params[name]).tobytes())
        return digest.hexdigest()[:12]

    def translate(self, sentences, target_lang, max_len=None):
        return translate(self, sentences, target_lang, max_len=max_len)

    def save(self, path):
        return save_snapshot(self, path)


@dataclass(frozen=True, eq=False)
class OptState:
    m: Dict[str, np.ndarray]
    v: Dict[str, np.ndarray]
    step: int = 0
    lr: float = 3e-3
    beta1: float = 0.9
    beta2: float = 0.98
    eps: float = 1e-8


def init_model(dims, seed):
    """Uniform(-0.08, 0.08) initialisation, deterministic per seed."""
    rng = derive_rng(seed, 'init_model')
    params = {
        name: rng.uniform(-INIT_SCALE, INIT_SCALE, size=shape)
        for name, shape in param_shapes(dims).items()
    }
    return ModelSnapshot(params=params, dims=dims, step=0)


def init_opt(model, settings=None):
    lr, beta1, beta2, eps = 3e-3, 0.9, 0.98, 1e-8
    if settings is not None:
        lr, beta1, beta2, eps = settings.lr, settings.beta1, settings.beta2, settings.eps
    return OptState(
        m={name: np.zeros_like(arr) for name, arr in model.params.items()},
        v={name: np.zeros_like(arr) for name, arr in model.params.items()},
        step=0, lr=lr, beta1=beta1, beta2=beta2, eps=eps,
    )


# ----------------------------
# Batch tensors
# ----------------------------
def pad_batch(sequences, pad=PAD):
    """Right-pad id sequences into an int matrix plus a float mask."""
    width = max(len(s) for s in sequences)
    ids = np.full((len(sequences), width), pad, dtype=np.int64)
    mask = np.zeros((len(sequences), width), dtype=np.float64)
    for i, seq in enumerate(sequences):
        ids[i, :len(seq)] = seq
        mask[i, :len(seq)] = 1.0
    return ids, mask


def wrap(sentence):
    return (BOS,) + tuple(sentence) + (EOS,)


def _resolve_tag(target_lang_tag):
    if isinstance(target_lang_tag, (Lang, str)) and not isinstance(target_lang_tag, int):
        return lang_tag_id(target_lang_tag)
    tag = int(target_lang_tag)
    if tag not in LANG_IDS.values():
        raise SpecValidationError('target_lang_tag', f"{tag} is not a language tag id")
    return tag


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _gru_forward(x, h, W, U, b):
    H = h.shape[1]
    gx = x @ W + b
    gh = h @ U[:, :2 * H]
    z = _sigmoid(gx[:, :H] + gh[:, :H])
    r = _sigmoid(gx[:, H:2 * H] + gh[:, H:])
    hh = np.tanh(gx[:, 2 * H:] + (r * h) @ U[:, 2 * H:])
    h_new = (1.0 - z) * h + z * hh
    return h_new, (x, h, z, r, hh)


def _gru_backward(dh_new, cache, W, U):
    x, h, z, r, hh = cache
    H = h.shape[1]
    dhh = dh_new * z
    dz = dh_new * (hh - h)
    dh = dh_new * (1.0 - z)
    dah = dhh * (1.0 - hh * hh)
    drh = dah @ U[:, 2 * H:].T
    dr = drh * h
    dh += drh * r
    daz = dz * z * (1.0 - z)
    dar = dr * r * (1.0 - r)
    dzr = np.concatenate([daz, dar], axis=1)
    dg = np.concatenate([dzr, dah], axis=1)
    dW = x.T @ dg
    db = dg.sum(axis=0)
    dU = np.empty_like(U)
    dU[:, :2 * H] = h.T @ dzr
    dU[:, 2 * H:] = (r * h).T @ dah
    dh += dzr @ U[:, :2 * H].T
    dx = dg @ W.T
    return dx, dh, dW, dU, db


def _encode(params, src_ids, src_mask):
    B, S = src_ids.shape
    H = params['enc_U'].shape[0]
    h = np.zeros((B, H))
    states = np.zeros((B, S, H))
    caches = []
    for t in range(S):
        x = params['embed'][src_ids[:, t]]
        h_new, cache = _gru_forward(x, h, params['enc_W'], params['enc_U'], params['enc_b'])
        m = src_mask[:, t:t + 1]
        h = m * h_new + (1.0 - m) * h
        states[:, t] = h
        caches.append(cache)
    return states, h, caches


def _attend(states, s, att_bias):
    scores = np.einsum('bsd,bd->bs', states, s) + att_bias
    scores -= scores.max(axis=1, keepdims=True)
    a = np.exp(scores)
    a /= a.sum(axis=1, keepdims=True)
    c = np.einsum('bs,bsd->bd', a, states)
    return a, c


def _log_softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _loss_and_grads(params, src_ids, src_mask, dec_in, dec_out, dec_mask, with_grads=True):
    B, T = dec_in.shape
    n_real = dec_mask.sum()
    states, h_final, enc_caches = _encode(params, src_ids, src_mask)
    att_bias = (1.0 - src_mask) * NEG_INF
    rows = np.arange(B)

    s = h_final
    loss = 0.0
    steps = []
    for t in range(T):
        x = params['embed'][dec_in[:, t]]
        s, gru_cache = _gru_forward(x, s, params['dec_W'], params['dec_U'], params['dec_b'])
        a, c = _attend(states, s, att_bias)
        o = np.concatenate([s, c], axis=1)
        logp = _log_softmax(o @ params['out_W'] + params['out_b'])
        w = dec_mask[:, t] / n_real
        loss -= float((logp[rows, dec_out[:, t]] * w).sum())
        steps.append((gru_cache, s, a, o, logp, w))

    if not with_grads:
        return loss, None

    grads = {name: np.zeros_like(arr) for name, arr in params.items()}
    d_states = np.zeros_like(states)
    ds_next = np.zeros_like(h_final)
    H = h_final.shape[1]
    for t in reversed(range(T)):
        gru_cache, s, a, o, logp, w = steps[t]
        dlogits = np.exp(logp)
        dlogits[rows, dec_out[:, t]] -= 1.0
        dlogits *= w[:, None]
        grads['out_W'] += o.T @ dlogits
        grads['out_b'] += dlogits.sum(axis=0)
        do = dlogits @ params['out_W'].T
        ds = do[:, :H] + ds_next
        dc = do[:, H:]
        # attention
        d_states += a[:, :, None] * dc[:, None, :]
        da = np.einsum('bsd,bd->bs', states, dc)
        dscores = a * (da - (a * da).sum(axis=1, keepdims=True))
        ds += np.einsum('bs,bsd->bd', dscores, states)
        d_states += dscores[:, :, None] * s[:, None, :]
        dx, ds_next, dW, dU, db = _gru_backward(ds, gru_cache, params['dec_W'], params['dec_U'])
        grads['dec_W'] += dW
        grads['dec_U'] += dU
        grads['dec_b'] += db
        np.add.at(grads['embed'], dec_in[:, t], dx)

    dh = ds_next
    for t in reversed(range(src_ids.shape[1])):
        dh_t = dh + d_states[:, t]
        m = src_mask[:, t:t + 1]
        dx, dh_prev, dW, dU, db = _gru_backward(m * dh_t, enc_caches[t], params['enc_W'], params['enc_U'])
        grads['enc_W'] += dW
        grads['enc_U'] += dU
        grads['enc_b'] += db
        np.add.at(grads['embed'], src_ids[:, t], dx)
        dh = dh_prev + (1.0 - m) * dh_t
    return loss, grads


def _prepare(src_batch, tgt_batch, target_lang_tag):
    if len(src_batch) != len(tgt_batch):
        raise SpecValidationError('tgt_batch', f"{len(src_batch)} sources but {len(tgt_batch)} targets")
    if not src_batch:
        raise SpecValidationError('src_batch', "empty batch")
    tag = _resolve_tag(target_lang_tag)
    for i, tgt in enumerate(tgt_batch):
        if len(tgt) < 2 or tgt[0] != BOS or tgt[-1] != EOS:
            raise SpecValidationError('tgt_batch', f"target {i} is not wrapped in BOS ... EOS")
    for i, src in enumerate(src_batch):
        if not src:
            raise SpecValidationError('src_batch', f"source {i} is empty")
    src_ids, src_mask = pad_batch(src_batch)
    tgt_ids, tgt_mask = pad_batch(tgt_batch)
    dec_in = tgt_ids[:, :-1].copy()
    # the BOS slot carries the target-language tag
    dec_in[:, 0] = tag
    return src_ids, src_mask, dec_in, tgt_ids[:, 1:], tgt_mask[:, 1:]


def _check_finite(loss, grads):
    if not np.isfinite(loss):
        raise NumericError('loss')
    for name in PARAM_NAMES:
        if not np.all(np.isfinite(grads[name])):
            raise NumericError(name)


def forward_loss(model, src_batch, tgt_batch, target_lang_tag):
    """
    Mean per-token cross-entropy under teacher forcing, with analytic gradients.

    tgt_batch sentences must be wrapped BOS ... EOS; padding is masked out.
    """
    tensors = _prepare(src_batch, tgt_batch, target_lang_tag)
    loss, grads = _loss_and_grads(model.params, *tensors)
    _check_finite(loss, grads)
    return loss, grads


def loss_only(model, src_batch, tgt_batch, target_lang_tag, params=None):
    tensors = _prepare(src_batch, tgt_batch, target_lang_tag)
    loss, _ = _loss_and_grads(model.params if params is None else params, *tensors, with_grads=False)
    return loss


# ----------------------------
# Optimisation
# ----------------------------
def clip_gradients(grads, max_norm):
    """Rescale gradients to a global L2 norm of at most max_norm."""
    if max_norm is None:
        return grads
    norm = float(np.sqrt(sum(float((g * g).sum()) for g in grads.values())))
    if norm <= max_norm or norm == 0.0:
        return grads
    scale = max_norm / norm
    return {name: g * scale for name, g in grads.items()}


def adam_step(opt, model, grads):
    """Bias-corrected Adam update; returns new optimizer state and snapshot."""
    for name in PARAM_NAMES:
        if name not in grads:
            raise ShapeMismatchError(name, model.params[name].shape, None)
        if grads[name].shape != model.params[name].shape:
            raise ShapeMismatchError(name, model.params[name].shape, grads[name].shape)
        if opt.m[name].shape != model.params[name].shape:
            raise ShapeMismatchError(name, model.params[name].shape, opt.m[name].shape)

    t = opt.step + 1
    bc1 = 1.0 - opt.beta1 ** t
    bc2 = 1.0 - opt.beta2 ** t
    new_m, new_v, new_params = {}, {}, {}
    for name in PARAM_NAMES:
        g = grads[name]
        m = opt.beta1 * opt.m[name] + (1.0 - opt.beta1) * g
        v = opt.beta2 * opt.v[name] + (1.0 - opt.beta2) * (g * g)
        m_hat = m / bc1
        v_hat = v / bc2
        new_params[name] = model.params[name] - opt.lr * m_hat / (np.sqrt(v_hat) + opt.eps)
        new_m[name], new_v[name] = m, v
        if not np.all(np.isfinite(new_params[name])):
            raise NumericError(name, "non-finite parameters after update")

    new_opt = OptState(m=new_m, v=new_v, step=t, lr=opt.lr, beta1=opt.beta1, beta2=opt.beta2, eps=opt.eps)
    return new_opt, ModelSnapshot(params=new_params, dims=model.dims, step=model.step + 1)


# ----------------------------
# Decoding
# ----------------------------
def _greedy(params, src_batch, tag, max_len, trace=None):
    src_ids, src_mask = pad_batch(src_batch)
    B = src_ids.shape[0]
    states, s, _ = _encode(params, src_ids, src_mask)
    att_bias = (1.0 - src_mask) * NEG_INF

    banned = np.zeros(params['out_b'].shape[0], dtype=bool)
    banned[list(BANNED_OUTPUTS)] = True

    prev = np.full(B, tag, dtype=np.int64)
    finished = np.zeros(B, dtype=bool)
    outputs = [[] for _ in range(B)]
    for t in range(max_len):
        s, _ = _gru_forward(params['embed'][prev], s, params['dec_W'], params['dec_U'], params['dec_b'])
        _, c = _attend(states, s, att_bias)
        logits = np.concatenate([s, c], axis=1) @ params['out_W'] + params['out_b']
        logits[:, banned] = -np.inf
        if t == 0:
            logits[:, EOS] = -np.inf
        if trace is not None:
            probs = np.exp(logits - logits.max(axis=1, keepdims=True))
            trace.append(probs / probs.sum(axis=1, keepdims=True))
        # argmax returns the first maximum, so ties go to the lowest id
        choice = np.argmax(logits, axis=1)
        for i in np.flatnonzero(~finished):
            if choice[i] == EOS:
                finished[i] = True
            else:
                outputs[i].append(int(choice[i]))
        if finished.all():
            break
        prev = choice
    return [tuple(o) for o in outputs]


def translate(model, sentences, target_lang, max_len=None, trace=None):
    """
    Greedy decoding toward target_lang.

    Stops at EOS or max_len tokens; never emits PAD, BOS, UNK or a language tag.
    """
    sentences = [tuple(s) if len(s) else (UNK,) for s in sentences]
    if not sentences:
        return []
    tag = _resolve_tag(target_lang)
    max_len = model.dims.max_decode_len if max_len is None else max_len
    out = []
    for start in range(0, len(sentences), DECODE_CHUNK):
        out.extend(_greedy(model.params, sentences[start:start + DECODE_CHUNK], tag, max_len, trace))
    return out


# ----------------------------
# Verification
# ----------------------------
def _sample_coords(model, src_batch, tgt_batch, n_coords, seed):
    rng = derive_rng(seed, 'grad_check')
    used_rows = sorted({tok for seq in src_batch for tok in seq} | {tok for seq in tgt_batch for tok in seq[:-1]}
                       | set(LANG_IDS.values()))
    per_param = int(np.ceil(n_coords / len(PARAM_NAMES)))
    coords = []
    for name in PARAM_NAMES:
        shape = model.params[name].shape
        for _ in range(per_param):
            if name == 'embed':
                idx = (int(rng.choice(used_rows)), int(rng.integers(shape[1])))
            else:
                idx = tuple(int(rng.integers(d)) for d in shape)
            coords.append((name, idx))
    return coords


def grad_check(model, batch, h=1e-4, n_coords=50, seed=0, coords=None, grad_fn=None):
    """
    Max relative error between analytic gradients and central differences.

    batch is (src_batch, tgt_batch, target_lang_tag). grad_fn replaces
    forward_loss for the analytic side; coords fixes the checked coordinates.
    """
    if not 1e-6 <= h <= 1e-3:
        raise SpecValidationError('h', f"must lie in [1e-6, 1e-3], got {h}")
    src_batch, tgt_batch, tag = batch
    _, grads = (grad_fn or forward_loss)(model, src_batch, tgt_batch, tag)
    if coords is None:
        coords = _sample_coords(model, src_batch, tgt_batch, n_coords, seed)

    params = model.writable_params()
    worst = 0.0
    for name, idx in coords:
        original = params[name][idx]
        params[name][idx] = original + h
        plus = loss_only(model, src_batch, tgt_batch, tag, params=params)
        params[name][idx] = original - h
        minus = loss_only(model, src_batch, tgt_batch, tag, params=params)
        params[name][idx] = original
        numeric = (plus - minus) / (2.0 * h)
        analytic = float(grads[name][idx])
        denom = max(abs(analytic) + abs(numeric), 1e-5)
        worst = max(worst, abs(analytic - numeric) / denom)
    logging.debug(f"🔍 Gradient check over {len(coords)} coordinates: max relative error {worst:.2e}")
    return worst


# ----------------------------
# Serialization
# ----------------------------
def save_snapshot(model, path):
    with open(path, 'wb') as f:
        np.savez(f, __header__=np.array(msgspec.json.encode(model.header(), order='sorted').decode('utf-8')), **model.params)
    logging.debug(f"✅ Saved snapshot {model.model_id} to {path}")
    return path


def load_snapshot(path):
    with np.load(path, allow_pickle=False) as data:
        header = msgspec.json.decode(str(data['__header__']))
        if header.get('format_version') != SNAPSHOT_FORMAT_VERSION:
            raise SpecValidationError('format_version', f"unsupported snapshot version {header.get('format_version')}")
        params = {name: data[name] for name in PARAM_NAMES}
    return ModelSnapshot(params=params, dims=ModelDims(**header['dims']), step=header['step'])
