import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from eatsss.traffic import (
    ArrivalConfig,
    ContentLibrary,
    TrafficType,
    assign_file_sizes,
    build_library,
    generate_requests,
    poisson_pmf,
    read_requests_csv,
    sample_file,
    sample_files,
    write_requests_csv,
    zipf_pmf,
)


def harmonic_oracle(n, alpha_int):
    z = 1 / sum(Fraction(1, i**alpha_int) for i in range(1, n + 1))
    return [z / f**alpha_int for f in range(1, n + 1)]


def test_zipf_small_cases():
    assert zipf_pmf(4, 0) == pytest.approx([0.25] * 4, abs=1e-15)
    assert zipf_pmf(1, 2.5).tolist() == [1.0]
    exact = harmonic_oracle(5, 1)
    assert exact[0] == Fraction(60, 137)
    assert zipf_pmf(5, 1.0) == pytest.approx([float(p) for p in exact], abs=1e-12)


@pytest.mark.parametrize("n,alpha", [(10**6, 0.8), (1000, 3.0), (10, 0.0)])
def test_zipf_normalized_and_non_increasing(n, alpha):
    p = zipf_pmf(n, alpha)
    assert abs(p.sum() - 1) < 1e-9
    assert np.all(np.diff(p) <= 0)


def test_zipf_rejects_bad_input():
    with pytest.raises(ValueError):
        zipf_pmf(0, 1)
    with pytest.raises(ValueError):
        zipf_pmf(5, -0.1)


def test_sampling_frequencies():
    lib = ContentLibrary(zipf_pmf(5, 1.0), np.ones(5, dtype=int), 1.0)
    draws = sample_files(lib, np.random.default_rng(1), 10**5)
    assert abs(np.mean(draws == 1) - 60 / 137) < 0.01
    one = ContentLibrary(zipf_pmf(1, 1.0), np.ones(1, dtype=int), 1.0)
    assert sample_file(one, np.random.default_rng(0)) == 1


def test_uniform_library_chi_square():
    lib = ContentLibrary(zipf_pmf(10, 0.0), np.ones(10, dtype=int), 0.0)
    counts = np.bincount(sample_files(lib, np.random.default_rng(2), 10**5), minlength=11)[1:]
    assert stats.chisquare(counts).pvalue > 0.001


def test_file_sizes():
    rng = np.random.default_rng(4)
    assert np.all(assign_file_sizes(50, 7, 7, rng) == 7)
    sizes = assign_file_sizes(10**4, 1_000_000, 10_000_000, rng)
    assert sizes.min() >= 1_000_000 and sizes.max() <= 10_000_000
    assert abs(sizes.mean() / 5.5e6 - 1) < 0.02
    assert abs(np.corrcoef(np.arange(10**4), sizes)[0, 1]) < 0.03
    with pytest.raises(ValueError):
        assign_file_sizes(3, 10, 5, rng)


def test_poisson_pmf():
    assert poisson_pmf(0, 0.0) == 1.0
    assert poisson_pmf(3, 0.0) == 0.0
    assert poisson_pmf(0, 2.0) == pytest.approx(math.exp(-2), rel=1e-15)
    assert abs(sum(poisson_pmf(r, 5.0) for r in range(51)) - 1) < 1e-12
    assert poisson_pmf(1000, 1000.0) == pytest.approx(stats.poisson.pmf(1000, 1000), rel=1e-10)
    with pytest.raises(ValueError):
        poisson_pmf(-1, 1.0)


def test_generate_requests_basic():
    lib = build_library(20, 0.8, 10, 100, np.random.default_rng(0))
    assert generate_requests(ArrivalConfig(2.0, 0.0, 1), lib, [1, 2]) == []
    reqs = generate_requests(ArrivalConfig(2.0, 500.0, 1), lib, [1, 2, 3])
    times = [r.arrival_time_s for r in reqs]
    assert times == sorted(times) and times[-1] < 500
    assert {r.user_id for r in reqs} == {1, 2, 3}
    assert all(r.size_bytes == lib.sizes_bytes[r.file_id - 1] for r in reqs)
    again = generate_requests(ArrivalConfig(2.0, 500.0, 1), lib, [1, 2, 3])
    assert reqs == again
    with pytest.raises(ValueError):
        generate_requests(ArrivalConfig(2.0, 5.0, 1), lib, [])


def test_arrival_config_validation():
    with pytest.raises(ValueError):
        ArrivalConfig(0.0, 10.0)
    with pytest.raises(ValueError):
        ArrivalConfig(1.0, math.inf)


def test_request_csv_round_trip(tmp_path):
    lib = build_library(20, 0.8, 10, 100, np.random.default_rng(0))
    reqs = generate_requests(ArrivalConfig(3.0, 50.0, 9), lib, [4, 5], traffic_type=TrafficType.URLLC)
    path = write_requests_csv(reqs, tmp_path / "r.csv")
    assert read_requests_csv(path) == reqs
    empty = write_requests_csv([], tmp_path / "e.csv")
    assert empty.read_text() == "arrival_time_s,user_id,file_id,size_bytes,traffic_type\n"
