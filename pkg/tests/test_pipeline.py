import math

import pytest

from config import RunConfig
from heights.morphism import power, raw
from heights.pipeline import run_report
from tasks import new_run_id, run_parallel, run_report_job

SMALL = RunConfig(mc_samples=20_000, mc_batch=10_000, kappa_grid=5_000, threads=1)


def square(x):
    return x * x


def test_run_parallel_keeps_order():
    seen = []
    assert run_parallel(square, range(6), progress_callback=lambda done, total: seen.append((done, total))) == \
        [0, 1, 4, 9, 16, 25]
    assert seen[-1] == (6, 6)
    assert run_parallel(square, range(6), threads=2) == [0, 1, 4, 9, 16, 25]


def test_new_run_id():
    run_id = new_run_id()
    assert len(run_id) == 8
    assert run_id != new_run_id()


def test_report_of_power_map():
    steps = []
    result = run_report(power(1, 2), SMALL, progress_callback=lambda p, s: steps.append((p, s)),
                        count_xs=(4, 9), chat_iters=1)
    assert result['status'] == 'completed'
    report = result['report']
    assert report['resultant']['bad_primes'] == []
    assert report['constant']['c'] == pytest.approx(12 / math.pi**2, rel=1e-6)
    assert [row['count'] for row in report['counts']] == [8, 16]
    assert report['canonical_heights']['(1 : 0)']['value'] == pytest.approx(0.0, abs=1e-9)
    assert steps[-1] == (100, 'completed')


def test_report_of_s_lift(s_lift):
    result = run_report(s_lift, SMALL, count_xs=(10,), chat_iters=1)
    assert result['status'] == 'completed'
    report = result['report']
    assert report['densities']['2']['delta'] == {'0': '2/3', '1': '1/3'}
    assert report['global_densities'] == {'<1>': '2/3', '<2>': '1/3'}
    assert report['constant_excess'] == {}
    assert [row['c0'] for row in report['chat']['sequence']] == ['1', '4/3']


def test_report_without_dynamics():
    F = raw(1, 2, [{(2, 0): 1}, {(0, 2): 1}, {(1, 1): 1}])
    result = run_report(F, SMALL, count_xs=(5,))
    assert result['status'] == 'completed'
    assert 'chat' not in result['report']


def test_report_of_a_non_morphism_fails():
    result = run_report(raw(1, 2, [{(2, 0): 1}, {(1, 1): 1}]), SMALL)
    assert result['status'] == 'failed'
    assert result['exit_code'] == 3
    assert result['error']['error_type'] == 'NotAMorphismError'
    assert 'resultant' not in result['report']


def test_report_job_with_unreadable_source():
    result = run_report_job('power:one', SMALL, run_id='abc12345')
    assert result['status'] == 'failed'
    assert result['run_id'] == 'abc12345'
    assert result['exit_code'] == 2
    assert 'report' not in result
    assert result['error']['error_type'] == 'ParseError'


def test_report_job_passes_options():
    progress = []
    result = run_report_job('power:1,2', SMALL, progress_callback=lambda p, s: progress.append(s),
                            count_xs=(4,), chat_iters=1)
    assert result['status'] == 'completed'
    assert progress[0] == 'starting'
    assert result['report']['counts'][0]['count'] == 8
