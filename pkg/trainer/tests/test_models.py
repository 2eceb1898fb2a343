import numpy as np
import torch

from homtrainer import models


def _bn_names(prefix):
    return [f"{prefix}.{s}" for s in ("weight", "bias", "bn.gamma", "bn.beta",
                                      "bn.mean", "bn.var")]


class TestDhNet:
    def test_export_manifest_names(self):
        m = models.DhNet(width_scale=0.0625)
        names = list(m.export_tensors())
        expected = []
        for i in range(1, 9):
            expected += _bn_names(f"conv{i}")
        expected += ["fc1.weight", "fc1.bias", "fc2.weight", "fc2.bias"]
        assert names == expected

    def test_zero_head_at_init(self):
        m = models.DhNet(width_scale=0.0625)
        m.eval()
        with torch.no_grad():
            out = m(torch.randn(2, 2, 128, 128))
        assert torch.all(out == 0)

    def test_color_input_channels(self):
        m = models.DhNet(width_scale=0.0625, color=True)
        assert m.in_channels == 6
        m.eval()
        with torch.no_grad():
            out = m(torch.randn(1, 6, 128, 128))
        assert out.shape == (1, 8)

    def test_export_load_round_trip(self):
        torch.manual_seed(0)
        m = models.DhNet(width_scale=0.0625)
        torch.nn.init.normal_(m.fc2.weight, std=0.01)
        m.eval()
        back = models.load_dh_from_tensors(m.export_tensors(),
                                           width_scale=0.0625)
        back.eval()
        x = torch.randn(1, 2, 128, 128)
        with torch.no_grad():
            assert torch.allclose(m(x), back(x), atol=0)


class TestHhModuleNet:
    def test_export_manifest_names_with_prefix(self):
        m = models.HhModuleNet(width_scale=0.0625)
        names = list(m.export_tensors(prefix="module2."))
        expected = []
        for i in range(1, 5):
            expected += _bn_names(f"module2.branch{i}")
        for i in range(1, 5):
            expected += _bn_names(f"module2.merged{i}")
        expected += ["module2.fc1.weight", "module2.fc1.bias",
                     "module2.fc2.weight", "module2.fc2.bias"]
        assert names == expected

    def test_branch_weights_shared(self):
        """Swapping the two patches routes both through the same branch."""
        torch.manual_seed(1)
        m = models.HhModuleNet(width_scale=0.0625)
        a = torch.randn(1, 1, 128, 128)
        fa = m._branch_forward(a)
        fb = m._branch_forward(a.clone())
        assert torch.equal(fa, fb)
        # one parameter set: 4 branch conv layers only
        n_branch_convs = sum(1 for n, _ in m.named_parameters()
                             if n.startswith("branch") and n.endswith("conv.weight"))
        assert n_branch_convs == 4

    def test_stack_export_prefixes(self):
        mods = [models.HhModuleNet(width_scale=0.0625) for _ in range(3)]
        names = list(models.export_hh_stack(mods))
        for i in (1, 2, 3):
            assert f"module{i}.branch1.weight" in names
            assert f"module{i}.fc2.bias" in names
        assert len(names) == 3 * (8 * 6 + 4)

    def test_width_scaling(self):
        m = models.HhModuleNet(width_scale=0.25)
        assert m.branch_widths == (16, 16, 16, 16)
        assert m.merged_widths == (32, 32, 32, 32)
        assert m.fc_hidden == 256
