import numpy as np
import pytest

import flexitac as ft


def press_scene(k_n, k_d, sigma=0.0):
    return ft.Scene.from_json(
        '{"pad": {"preset": "12x32"},'
        ' "shapes": [{"kind": "sphere", "center_m": [0, 0, 0.0205], "radius_m": 0.02,'
        '             "velocity_mps": [0, 0, -0.02]}],'
        f' "contact": {{"k_n_npm": {k_n}, "k_d_nspm": {k_d}, "noise_sigma_counts": {sigma}}},'
        ' "dt_s": 0.001, "steps": 150}'
    )


def test_grid_geometry():
    g = ft.GridConfig.preset("12x32")
    assert (g.rows, g.cols, g.taxel_count, g.max_count) == (12, 32, 384, 1023)
    pts = ft.taxel_local_positions(g)
    assert pts.shape == (384, 3)
    assert np.allclose(pts.mean(axis=0), 0.0, atol=1e-12)
    assert np.isclose(np.ptp(pts[:, 0]), 0.062)
    assert np.isclose(np.ptp(pts[:, 1]), 0.022)


def test_codec_round_trip():
    g = ft.GridConfig.preset("8x16")
    values = np.arange(128, dtype=np.uint16).reshape(8, 16)
    frame = ft.TactileFrame(g, values, sequence=7, timestamp_ms=70)
    data = ft.encode_frame(frame)
    assert len(data) == ft.encoded_frame_size(g) == 10 + 256 + 2
    assert data[:2] == b"\xaa\x55"
    back = ft.decode_frame(data)
    assert back == frame
    assert np.array_equal(back.values, values)
    assert ft.crc16_ccitt_false(b"123456789") == 0x29B1

    bad = bytearray(data)
    bad[40] ^= 0x01
    with pytest.raises(ft.DecodeError):
        ft.decode_frame(bytes(bad))


def test_stream_decoder_chunks():
    g = ft.GridConfig.preset("12x32")
    frames = [ft.TactileFrame(g, np.full((12, 32), i, dtype=np.uint16), sequence=i) for i in range(5)]
    stream = b"".join(ft.encode_frame(f) for f in frames)
    dec = ft.StreamDecoder()
    got = []
    for i in range(0, len(stream), 333):
        got += dec.feed(stream[i : i + 333])
    assert got == frames
    assert dec.stats["frames_ok"] == 5


def test_contact_and_force():
    s = ft.SdfShape.sphere(np.array([0.0, 0.0, 0.0]), 0.01)
    assert s.distance(np.array([0.0, 0.0, 0.02])) == pytest.approx(0.01)
    p = ft.ContactParams(k_n=500, k_d=5)
    assert ft.kelvin_voigt_force(p, 0.0, 1.0) == 0.0
    assert ft.kelvin_voigt_force(p, 0.001, 0.0) == pytest.approx(0.5)
    with pytest.raises(ft.ContractViolation):
        ft.kelvin_voigt_force(p, -0.001, 0.0)


def test_fit_recovers_parameters():
    rng = np.random.default_rng(1)
    d = rng.uniform(0.0002, 0.003, 50)
    r = rng.uniform(-0.01, 0.03, 50)
    y = 400 * np.maximum(0.0, 500 * d + 5 * r) + 50
    fit = ft.fit_kelvin_voigt(d, r, y)
    assert fit.k_n == pytest.approx(500, rel=1e-6)
    assert fit.k_d == pytest.approx(5, rel=1e-6)
    with pytest.raises(ft.UnidentifiableError):
        ft.fit_kelvin_voigt(np.zeros(1), np.zeros(1), np.full(1, 50.0))


def test_histograms():
    edges, masses, count = ft.histogram([0.5] * 10, bins=10, floor_cut=0.0)
    assert masses[5] == 1.0 and count == 10 and len(edges) == 11
    assert ft.histogram_intersection([0.5, 0.5], [0.25, 0.75]) == pytest.approx(0.75)


def test_closed_loop_calibration():
    log = ft.encode_frames(ft.simulate(press_scene(600, 25, 2.0), seed=1))
    report = ft.calibrate(log, press_scene(400, 10, 2.0), 5, 15, ft.NormalizationRule(56, 1023), seed=2)
    assert report["k_n"] == pytest.approx(600, rel=0.01)
    assert report["k_d"] == pytest.approx(25, rel=0.01)
    assert report["overlap_after"] >= report["overlap_before"]


def test_fusion():
    g = ft.GridConfig.preset("12x32")
    frame = ft.TactileFrame(g, np.full((12, 32), 60, dtype=np.uint16))
    pose = ft.RigidTransform.from_quaternion(0.9, 0.1, 0.2, 0.3, np.array([0.1, 0.0, 0.2]))
    rule = ft.NormalizationRule(50, 1023)
    xyz, mag = ft.lift_tactile(frame, ft.PadGeometry(g, pose), rule)
    local = ft.taxel_local_positions(g)
    assert np.allclose(xyz, local @ pose.rotation.T + pose.translation, atol=1e-12)
    assert np.allclose(mag, 10 / 973)

    visual = np.random.default_rng(0).uniform(-1, 1, (1000, 3))
    fused = ft.fuse(visual, np.full(1000, 0.5), frame, ft.PadGeometry(g), rule)
    assert fused.shape == (1384, 5)
    assert (fused[:, 4] == 0).sum() == 1000
    assert (fused[:, 4] == 1).sum() == 384
    assert np.array_equal(fused[:1000, :3], visual)
