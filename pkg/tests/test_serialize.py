"""Model JSON round trips must be exact, and bad payloads must be loud."""
import json

import numpy as np
import pytest

from calibkit.binary import fit_bbq, fit_histogram, fit_isotonic, fit_platt
from calibkit.errors import DataFormatError, DataIOError
from calibkit.multiclass import fit_affine, fit_one_vs_all, fit_temperature
from calibkit.serialize import load_model, model_from_dict, model_to_dict, save_model
from calibkit.synth import SynthSpec, gen_binary, gen_sharpened

BINARY_SET = gen_binary(300, 0.2, seed=71)
DATASET = gen_sharpened(SynthSpec(n=400, k=3, sharpening=2.0, logit_scale=2.0, seed=72))


def _all_models():
    return {
        "histogram": fit_histogram(BINARY_SET, m_bins=6),
        "isotonic": fit_isotonic(BINARY_SET),
        "bbq": fit_bbq(BINARY_SET, candidate_bin_counts=[1, 3, 6]),
        "platt": fit_platt(BINARY_SET),
        "temperature": fit_temperature(DATASET),
        "vector": fit_affine(DATASET, "vector"),
        "ova_histogram": fit_one_vs_all(DATASET, "histogram", m_bins=5),
        "ova_isotonic": fit_one_vs_all(DATASET, "isotonic"),
        "ova_bbq": fit_one_vs_all(DATASET, "bbq", candidate_bin_counts=[1, 4]),
    }


def _assert_models_equal(a, b):
    assert type(a) is type(b)
    da, db = model_to_dict(a), model_to_dict(b)
    assert da == db


class TestRoundTrips:
    def test_every_model_survives_json(self, tmp_path):
        for name, model in _all_models().items():
            path = tmp_path / f"{name}.json"
            save_model(model, path)
            back = load_model(path)
            _assert_models_equal(model, back)

    def test_json_text_is_reparseable_and_discriminated(self, tmp_path):
        model = fit_temperature(DATASET)
        save_model(model, tmp_path / "m.json")
        payload = json.loads((tmp_path / "m.json").read_text())
        assert payload["method"] == "temperature"
        assert payload["temperature"] == model.temperature

    def test_round_trip_is_bit_exact_for_awkward_floats(self):
        # Shortest-repr floats must reparse to identical doubles.
        model = fit_platt(BINARY_SET)
        back = model_from_dict(json.loads(json.dumps(model_to_dict(model))))
        assert back.a == model.a and back.b == model.b

    def test_affine_dict_shape(self):
        model = fit_affine(DATASET, "vector")
        payload = model_to_dict(model)
        assert payload["method"] == "vector"
        assert np.asarray(payload["weight"]).shape == (3, 3)
        assert len(payload["bias"]) == 3

    def test_ova_method_name_uses_underscore(self):
        payload = model_to_dict(fit_one_vs_all(DATASET, "histogram", m_bins=4))
        assert payload["method"] == "ova_histogram"
        assert len(payload["per_class"]) == 3


class TestBadPayloads:
    def test_unknown_method(self):
        with pytest.raises(DataFormatError, match="unknown"):
            model_from_dict({"method": "quantile"})

    def test_missing_discriminator(self):
        with pytest.raises(DataFormatError):
            model_from_dict({"temperature": 2.0})

    def test_missing_fields_named(self):
        with pytest.raises(DataFormatError, match="thetas"):
            model_from_dict({"method": "histogram", "boundaries": [0.0, 1.0]})

    def test_invalid_values_rejected(self):
        with pytest.raises(DataFormatError):
            model_from_dict({"method": "temperature", "temperature": -1.0})

    def test_not_json_file(self, tmp_path):
        path = tmp_path / "m.json"
        path.write_text("{nope")
        with pytest.raises(DataFormatError):
            load_model(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataIOError):
            load_model(tmp_path / "absent.json")
