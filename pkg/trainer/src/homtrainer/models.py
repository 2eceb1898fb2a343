"""Torch definitions of the DH and HH estimators plus HWTS export.

Layer order and pooling positions mirror the inference engine exactly:

* DH: eight conv(3x3, pad 1) -> batchnorm -> ReLU blocks with 2x2 max
  pooling before blocks 3, 5 and 7, then flatten -> dropout -> FC ->
  ReLU -> dropout -> FC(8).
* HH module: four shared conv blocks per patch (pool after block 2),
  channel concat, four merged conv blocks (pool after merged 1 and 3),
  then the same FC head.

Export writes one tensor per manifest name; batchnorm is exported in
inference form (gamma/beta plus running mean/var, eps = 1e-5 on both
sides), so no separate folding step is needed.
"""

from collections import OrderedDict

import torch
from torch import nn

PATCH = 128
DH_BASE_WIDTHS = (64, 64, 64, 64, 128, 128, 128, 128)
HH_BASE_BRANCH = (64, 64, 64, 64)
HH_BASE_MERGED = (128, 128, 128, 128)
BASE_FC = 1024
DROPOUT = 0.5


def scaled(widths, width_scale):
    return tuple(max(1, int(round(w * width_scale))) for w in widths)


def _conv_block(c_in, c_out):
    return nn.Sequential(OrderedDict([
        ("conv", nn.Conv2d(c_in, c_out, 3, padding=1)),
        ("bn", nn.BatchNorm2d(c_out, eps=1e-5)),
        ("relu", nn.ReLU()),
    ]))


class DhNet(nn.Module):
    def __init__(self, width_scale=1.0, color=False):
        super().__init__()
        self.in_channels = 6 if color else 2
        self.conv_widths = scaled(DH_BASE_WIDTHS, width_scale)
        self.fc_hidden = max(8, int(round(BASE_FC * width_scale)))
        blocks = []
        c = self.in_channels
        for w in self.conv_widths:
            blocks.append(_conv_block(c, w))
            c = w
        self.blocks = nn.ModuleList(blocks)
        self.pool = nn.MaxPool2d(2)
        flat = self.conv_widths[-1] * (PATCH // 8) ** 2
        self.drop = nn.Dropout(DROPOUT)
        self.fc1 = nn.Linear(flat, self.fc_hidden)
        self.fc2 = nn.Linear(self.fc_hidden, 8)
        nn.init.zeros_(self.fc2.weight)
        nn.init.zeros_(self.fc2.bias)

    def forward(self, x):
        for i, block in enumerate(self.blocks, start=1):
            if i in (3, 5, 7):
                x = self.pool(x)
            x = block(x)
        x = torch.flatten(x, 1)
        x = self.drop(x)
        x = torch.relu(self.fc1(x))
        x = self.drop(x)
        return self.fc2(x)

    def export_tensors(self, prefix=""):
        out = OrderedDict()
        for i, block in enumerate(self.blocks, start=1):
            _export_conv_block(out, f"{prefix}conv{i}", block)
        _export_fc_head(out, prefix, self.fc1, self.fc2)
        return out


class HhModuleNet(nn.Module):
    def __init__(self, width_scale=1.0):
        super().__init__()
        self.branch_widths = scaled(HH_BASE_BRANCH, width_scale)
        self.merged_widths = scaled(HH_BASE_MERGED, width_scale)
        self.fc_hidden = max(8, int(round(BASE_FC * width_scale)))
        branch = []
        c = 1
        for w in self.branch_widths:
            branch.append(_conv_block(c, w))
            c = w
        self.branch = nn.ModuleList(branch)
        merged = []
        c = 2 * self.branch_widths[-1]
        for w in self.merged_widths:
            merged.append(_conv_block(c, w))
            c = w
        self.merged = nn.ModuleList(merged)
        self.pool = nn.MaxPool2d(2)
        flat = self.merged_widths[-1] * (PATCH // 8) ** 2
        self.drop = nn.Dropout(DROPOUT)
        self.fc1 = nn.Linear(flat, self.fc_hidden)
        self.fc2 = nn.Linear(self.fc_hidden, 8)
        nn.init.zeros_(self.fc2.weight)
        nn.init.zeros_(self.fc2.bias)

    def _branch_forward(self, x):
        for i, block in enumerate(self.branch, start=1):
            x = block(x)
            if i == 2:
                x = self.pool(x)
        return x

    def forward(self, x):
        # x carries both patches on the channel axis; the branch weights
        # are shared between them.
        original, warped = x[:, :1], x[:, 1:]
        feats = torch.cat([self._branch_forward(original),
                           self._branch_forward(warped)], dim=1)
        for i, block in enumerate(self.merged, start=1):
            feats = block(feats)
            if i in (1, 3):
                feats = self.pool(feats)
        feats = torch.flatten(feats, 1)
        feats = self.drop(feats)
        feats = torch.relu(self.fc1(feats))
        feats = self.drop(feats)
        return self.fc2(feats)

    def export_tensors(self, prefix=""):
        out = OrderedDict()
        for i, block in enumerate(self.branch, start=1):
            _export_conv_block(out, f"{prefix}branch{i}", block)
        for i, block in enumerate(self.merged, start=1):
            _export_conv_block(out, f"{prefix}merged{i}", block)
        _export_fc_head(out, prefix, self.fc1, self.fc2)
        return out


def _export_conv_block(out, name, block):
    conv, bn = block.conv, block.bn
    out[f"{name}.weight"] = conv.weight.detach().numpy()
    out[f"{name}.bias"] = conv.bias.detach().numpy()
    out[f"{name}.bn.gamma"] = bn.weight.detach().numpy()
    out[f"{name}.bn.beta"] = bn.bias.detach().numpy()
    out[f"{name}.bn.mean"] = bn.running_mean.detach().numpy()
    out[f"{name}.bn.var"] = bn.running_var.detach().numpy()


def _export_fc_head(out, prefix, fc1, fc2):
    out[f"{prefix}fc1.weight"] = fc1.weight.detach().numpy()
    out[f"{prefix}fc1.bias"] = fc1.bias.detach().numpy()
    out[f"{prefix}fc2.weight"] = fc2.weight.detach().numpy()
    out[f"{prefix}fc2.bias"] = fc2.bias.detach().numpy()


def export_hh_stack(modules):
    out = OrderedDict()
    for i, module in enumerate(modules, start=1):
        out.update(module.export_tensors(prefix=f"module{i}."))
    return out


def _load_conv_block(block, tensors, name):
    block.conv.weight.data = torch.from_numpy(
        tensors[f"{name}.weight"].copy())
    block.conv.bias.data = torch.from_numpy(tensors[f"{name}.bias"].copy())
    block.bn.weight.data = torch.from_numpy(
        tensors[f"{name}.bn.gamma"].copy())
    block.bn.bias.data = torch.from_numpy(tensors[f"{name}.bn.beta"].copy())
    block.bn.running_mean.data = torch.from_numpy(
        tensors[f"{name}.bn.mean"].copy())
    block.bn.running_var.data = torch.from_numpy(
        tensors[f"{name}.bn.var"].copy())


def _load_fc_head(model, tensors, prefix):
    model.fc1.weight.data = torch.from_numpy(
        tensors[f"{prefix}fc1.weight"].copy())
    model.fc1.bias.data = torch.from_numpy(tensors[f"{prefix}fc1.bias"].copy())
    model.fc2.weight.data = torch.from_numpy(
        tensors[f"{prefix}fc2.weight"].copy())
    model.fc2.bias.data = torch.from_numpy(tensors[f"{prefix}fc2.bias"].copy())


def load_dh_from_tensors(tensors, width_scale=1.0, color=False):
    """Rebuild a DhNet from exported tensors (shapes must match)."""
    model = DhNet(width_scale=width_scale, color=color)
    for i, block in enumerate(model.blocks, start=1):
        _load_conv_block(block, tensors, f"conv{i}")
    _load_fc_head(model, tensors, "")
    return model


def load_hh_stack_from_tensors(tensors, module_count, width_scale=1.0):
    modules = []
    for m in range(1, module_count + 1):
        module = HhModuleNet(width_scale=width_scale)
        for i, block in enumerate(module.branch, start=1):
            _load_conv_block(block, tensors, f"module{m}.branch{i}")
        for i, block in enumerate(module.merged, start=1):
            _load_conv_block(block, tensors, f"module{m}.merged{i}")
        _load_fc_head(module, tensors, f"module{m}.")
        modules.append(module)
    return modules
