import math

import pytest

import scfdpy


@pytest.fixture(scope="module")
def normals():
    return scfdpy.gen(seed=3, n=2000)


@pytest.fixture(scope="module")
def profile(normals):
    return scfdpy.train(normals, candidate_stride=20, threads=2)


def test_cutoff():
    assert math.isclose(scfdpy.cutoff(0.05), 1.95996, abs_tol=1e-4)
    assert math.isclose(scfdpy.cutoff(0.01), 2.57583, abs_tol=1e-4)
    assert math.isclose(math.erf(0.707107 * scfdpy.cutoff(0.2)), 0.8, abs_tol=1e-6)


def test_generated_traces(normals):
    assert len(normals) == 2000
    names = {c for t in normals for c in t.calls}
    assert len(names) == 14
    assert all(t.terminated for t in normals)
    shell = scfdpy.gen(seed=1, n=3, attack="shellcode")
    assert all("execve" in t.calls and not t.terminated for t in shell)
    with pytest.raises(ValueError):
        scfdpy.gen(seed=1, n=1, attack="bogus")


def test_training_and_classify(profile, normals):
    assert profile.k == 5
    assert len(profile.kept) == 10
    assert sorted(profile.merged) == ["brk", "futex", "rt_sigreturn", "sendto"]
    fp = sum(profile.classify(t)["malicious"] for t in normals[:500])
    assert fp / 500 <= 0.10
    leak = scfdpy.gen(seed=7, n=20, attack="httpleak")
    assert all(profile.classify(t)["malicious"] for t in leak)
    v = profile.classify(leak[0], disable_rules="i,ii")
    assert v["rule"] == "distance" and v["distance"] > v["theta"]
    shell = profile.classify(scfdpy.gen(seed=7, n=1, attack="shellcode")[0])
    assert shell["rule"] == "unseen_type" and shell["unseen"] == "execve"
    assert profile.explain(normals[0]).startswith("VERDICT=")


def test_profile_round_trip(profile, normals, tmp_path):
    blob = profile.to_bytes()
    assert blob[:8] == b"SCFDPROF"
    again = scfdpy.Profile.from_bytes(blob)
    assert again.to_bytes() == blob
    path = str(tmp_path / "p.bin")
    profile.save(path)
    loaded = scfdpy.Profile.load(path)
    assert [loaded.classify(t) for t in normals[:50]] == [profile.classify(t) for t in normals[:50]]
    with pytest.raises(scfdpy.ScfdError, match="CorruptProfile|checksum"):
        scfdpy.Profile.from_bytes(blob[:-1] + bytes([blob[-1] ^ 1]))


def test_jsonl_round_trip():
    traces = scfdpy.gen(seed=5, n=4, attack="ftpleak", flow=1)
    back = scfdpy.parse_log(scfdpy.to_jsonl(traces))
    assert back == traces
    assert all(t.flow == 1 for t in back)


def test_pst(normals):
    m = scfdpy.pst_train(normals[:200], depth=5)
    assert m.depth == 5
    toy = scfdpy.pst_train([scfdpy.Trace(["a", "b", "a", "b"])], depth=2)
    assert toy.score(scfdpy.Trace(["a", "b"])) == [0.5, 1.0]
    assert toy.score(scfdpy.Trace(["a", "zz"])) == [0.5, 0.0]
    corrupt = scfdpy.gen(seed=9, n=5, attack="datacorrupt")
    for t in corrupt:
        v = m.classify(t)
        assert v["malicious"] and t.calls[v["position"]] == "close"
