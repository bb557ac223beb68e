"""Edge-enhanced UNet.

A 5-level encoder-decoder segmentation trunk plus a per-stage edge
detector: every encoder stage is projected to a full-resolution edge
logit, the five logits are fused by a spatial attention block into the
edge map, and a fixed boundary-enhance operator derives a second edge
map from the segmentation output so the two can be tied together by a
consistency loss.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path

import torch
import torch.nn as nn
import torch.nn.functional as F
from torchvision.models import resnet34

from yoho.errors import CheckpointMismatch, ShapeError

CHECKPOINT_VERSION = 1
NUM_STAGES = 5


@dataclass(frozen=True)
class NetworkConfig:
    encoder: str = "resnet34"  # "resnet34" | "small"
    in_channels: int = 3
    base_width: int = 64
    use_pretrained_encoder: bool = False
    attention_hidden: int = 16

    def __post_init__(self):
        if self.encoder not in ("resnet34", "small"):
            raise ValueError(f"unknown encoder '{self.encoder}'")
        if self.base_width < 8:
            raise ValueError("base_width must be >= 8")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ModelOutputs:
    """Network triple plus the per-stage diagnostic edge maps, all in [0, 1]."""

    s_hat: torch.Tensor  # Bx1xHxW
    e_hat: torch.Tensor  # Bx1xHxW
    e_hat_prime: torch.Tensor  # Bx1xHxW
    stage_edges: torch.Tensor  # Bx5xHxW


class ConvBlock(nn.Module):
    def __init__(self, in_ch: int, out_ch: int):
        super().__init__()
        self.block = nn.Sequential(
            nn.Conv2d(in_ch, out_ch, 3, padding=1, bias=False),
            nn.BatchNorm2d(out_ch),
            nn.ReLU(inplace=True),
            nn.Conv2d(out_ch, out_ch, 3, padding=1, bias=False),
            nn.BatchNorm2d(out_ch),
            nn.ReLU(inplace=True),
        )

    def forward(self, x):
        return self.block(x)


class ResNet34Encoder(nn.Module):
    """Residual 34-layer trunk exposing 5 stage features at strides 2..32."""

    def __init__(self, in_channels: int = 3):
        super().__init__()
        net = resnet34(weights=None)
        if in_channels != 3:
            net.conv1 = nn.Conv2d(in_channels, 64, 7, stride=2, padding=3, bias=False)
        self.conv1, self.bn1, self.relu = net.conv1, net.bn1, net.relu
        self.maxpool = net.maxpool
        self.layer1, self.layer2 = net.layer1, net.layer2
        self.layer3, self.layer4 = net.layer3, net.layer4
        self.stage_channels = (64, 64, 128, 256, 512)

    def forward(self, x) -> list[torch.Tensor]:
        f1 = self.relu(self.bn1(self.conv1(x)))
        f2 = self.layer1(self.maxpool(f1))
        f3 = self.layer2(f2)
        f4 = self.layer3(f3)
        f5 = self.layer4(f4)
        return [f1, f2, f3, f4, f5]

    def load_pretrained(self, path: str | Path) -> None:
        state = torch.load(path, map_location="cpu", weights_only=True)
        if isinstance(state, dict) and "state_dict" in state:
            state = state["state_dict"]
        own = self.state_dict()
        filtered = {k: v for k, v in state.items() if k in own}
        mismatched = [k for k, v in filtered.items() if own[k].shape != v.shape]
        if mismatched or not filtered:
            raise CheckpointMismatch(f"pretrained encoder mismatch: {mismatched or 'no overlapping keys'}")
        self.load_state_dict(filtered, strict=False)


class SmallEncoder(nn.Module):
    """Tiny 5-stage strided conv trunk for fast tests; same stride contract."""

    def __init__(self, in_channels: int = 3, base_width: int = 8):
        super().__init__()
        w = base_width
        widths = (w, w, 2 * w, 4 * w, 4 * w)
        self.stages = nn.ModuleList()
        prev = in_channels
        for out in widths:
            self.stages.append(
                nn.Sequential(
                    nn.Conv2d(prev, out, 3, stride=2, padding=1, bias=False),
                    nn.BatchNorm2d(out),
                    nn.ReLU(inplace=True),
                )
            )
            prev = out
        self.stage_channels = widths

    def forward(self, x) -> list[torch.Tensor]:
        feats = []
        for stage in self.stages:
            x = stage(x)
            feats.append(x)
        return feats


class EdgeFusion(nn.Module):
    """Per-pixel attention over the stage edge maps.

    A 3x3 conv stack scores the concatenated maps; a channel softmax turns
    the scores into weights summing to one at every pixel; the output is
    the logistic of the weighted sum.
    """

    def __init__(self, n_maps: int = NUM_STAGES, hidden: int = 16):
        super().__init__()
        self.score = nn.Sequential(
            nn.Conv2d(n_maps, hidden, 3, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(hidden, n_maps, 3, padding=1),
        )

    def attention(self, maps: torch.Tensor) -> torch.Tensor:
        return torch.softmax(self.score(maps), dim=1)

    def forward(self, maps: torch.Tensor) -> torch.Tensor:
        if maps.dim() != 4:
            raise ShapeError(f"expected BxNxHxW stage maps, got shape {tuple(maps.shape)}")
        weights = self.attention(maps)
        fused = (weights * maps).sum(dim=1, keepdim=True)
        return torch.sigmoid(fused)


def boundary_enhance(s_hat: torch.Tensor) -> torch.Tensor:
    """Fixed morphological gradient: maxpool3(s) - minpool3(s).

    Replicate padding keeps the window inside the frame, so constant maps
    yield exactly zero everywhere including the borders.
    """
    if s_hat.dim() == 2:
        return boundary_enhance(s_hat[None, None])[0, 0]
    padded = F.pad(s_hat, (1, 1, 1, 1), mode="replicate")
    mx = F.max_pool2d(padded, 3, stride=1)
    mn = -F.max_pool2d(-padded, 3, stride=1)
    return mx - mn


class EUNet(nn.Module):
    def __init__(self, cfg: NetworkConfig):
        super().__init__()
        self.cfg = cfg
        if cfg.encoder == "resnet34":
            self.encoder = ResNet34Encoder(cfg.in_channels)
        else:
            self.encoder = SmallEncoder(cfg.in_channels, cfg.base_width)
        chans = self.encoder.stage_channels

        self.up_blocks = nn.ModuleList()
        prev = chans[4]
        for skip_ch in reversed(chans[:4]):
            self.up_blocks.append(ConvBlock(prev + skip_ch, skip_ch))
            prev = skip_ch
        self.seg_head = nn.Conv2d(prev, 1, 1)

        self.edge_projections = nn.ModuleList(nn.Conv2d(c, 1, 1) for c in chans)
        self.fusion = EdgeFusion(NUM_STAGES, cfg.attention_hidden)
        self._init_weights()

    def _init_weights(self) -> None:
        scope = self.modules() if self.cfg.encoder == "small" else [
            m for name, m in self.named_modules() if not name.startswith("encoder")
        ]
        for m in scope:
            if isinstance(m, nn.Conv2d):
                nn.init.kaiming_normal_(m.weight, mode="fan_out", nonlinearity="relu")
                if m.bias is not None:
                    nn.init.zeros_(m.bias)
            elif isinstance(m, nn.BatchNorm2d):
                nn.init.ones_(m.weight)
                nn.init.zeros_(m.bias)

    def forward(self, x: torch.Tensor) -> ModelOutputs:
        if x.dim() != 4 or x.shape[1] != self.cfg.in_channels:
            raise ShapeError(f"expected Bx{self.cfg.in_channels}xHxW input, got {tuple(x.shape)}")
        h, w = x.shape[2], x.shape[3]
        if h % 32 or w % 32:
            raise ShapeError(f"input size {h}x{w} not divisible by 32")

        feats = self.encoder(x)

        d = feats[4]
        for block, skip in zip(self.up_blocks, reversed(feats[:4])):
            d = F.interpolate(d, size=skip.shape[2:], mode="bilinear", align_corners=False)
            d = block(torch.cat([d, skip], dim=1))
        seg_logit = F.interpolate(self.seg_head(d), size=(h, w), mode="bilinear", align_corners=False)
        s_hat = torch.sigmoid(seg_logit)

        stage_logits = []
        for proj, f in zip(self.edge_projections, feats):
            logit = F.interpolate(proj(f), size=(h, w), mode="bilinear", align_corners=False)
            stage_logits.append(logit)
        stage_logits = torch.cat(stage_logits, dim=1)
        # fusion runs on the stage logits so e_hat spans the full (0, 1) range;
        # the diagnostic stage_edges are their logistic images
        e_hat = self.fusion(stage_logits)
        e_hat_prime = boundary_enhance(s_hat)
        return ModelOutputs(
            s_hat=s_hat,
            e_hat=e_hat,
            e_hat_prime=e_hat_prime,
            stage_edges=torch.sigmoid(stage_logits),
        )

    # -- parameter partition -------------------------------------------------

    def encoder_parameters(self):
        return self.encoder.parameters()

    def non_encoder_parameters(self):
        return (p for name, p in self.named_parameters() if not name.startswith("encoder."))

    def set_encoder_frozen(self, frozen: bool) -> None:
        """Freeze gradients and normalization statistics of the encoder."""
        for p in self.encoder.parameters():
            p.requires_grad_(not frozen)
        self.encoder.train(self.training and not frozen)

    def train(self, mode: bool = True):
        super().train(mode)
        frozen = not next(iter(self.encoder.parameters())).requires_grad
        if frozen:
            self.encoder.eval()
        return self


def init_params(
    cfg: NetworkConfig,
    seed: int = 0,
    encoder_checkpoint: str | Path | None = None,
    device: str = "cpu",
) -> EUNet:
    """Build a deterministically initialized network.

    The encoder loads ``encoder_checkpoint`` when use_pretrained_encoder is
    set and a path is supplied; everything else gets He-style random init.
    """
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        model = EUNet(cfg)
    if cfg.use_pretrained_encoder and encoder_checkpoint is not None:
        if not isinstance(model.encoder, ResNet34Encoder):
            raise CheckpointMismatch("pretrained weights are only available for the resnet34 encoder")
        model.encoder.load_pretrained(encoder_checkpoint)
    return model.to(device)


def params_hash(model: nn.Module, prefix: str = "") -> str:
    """SHA-256 over the named parameter and buffer bytes (sorted by name)."""
    import hashlib

    digest = hashlib.sha256()
    items = list(model.named_parameters()) + list(model.named_buffers())
    for name, tensor in sorted(items, key=lambda kv: kv[0]):
        if prefix and not name.startswith(prefix):
            continue
        digest.update(name.encode())
        digest.update(tensor.detach().cpu().numpy().tobytes())
    return digest.hexdigest()


def save_checkpoint(model: EUNet, path: str | Path) -> None:
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "config": model.cfg.to_dict(),
        "state_dict": {k: v.cpu() for k, v in model.state_dict().items()},
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    torch.save(payload, tmp)
    tmp.replace(path)


def load_checkpoint(path: str | Path, device: str = "cpu") -> EUNet:
    path = Path(path)
    if not path.is_file():
        raise CheckpointMismatch(f"checkpoint not found: {path}")
    payload = torch.load(path, map_location="cpu", weights_only=True)
    if not isinstance(payload, dict) or "state_dict" not in payload:
        raise CheckpointMismatch(f"not a parameter checkpoint: {path}")
    if payload.get("format_version") != CHECKPOINT_VERSION:
        raise CheckpointMismatch(f"unsupported checkpoint version {payload.get('format_version')}")
    cfg = NetworkConfig(**payload["config"])
    model = EUNet(cfg)
    try:
        model.load_state_dict(payload["state_dict"], strict=True)
    except RuntimeError as exc:
        raise CheckpointMismatch(str(exc)) from exc
    return model.to(device)
