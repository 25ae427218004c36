import time
from unittest.mock import patch

import pytest

from config.settings import Settings
from core.exceptions import ConfigurationError
from harness.experiments import Ablation, ExperimentSpec, RunOutcome
from harness.results import ResultWriter
from manager import (
    DEFAULT_OPTIONS,
    EXIT_CONFIG,
    EXIT_INGESTION,
    EXIT_OK,
    ExperimentManager,
    build_parser,
    build_spec,
    main,
    merge_options,
    parse_manifest,
)
from tests.helpers import make_regression, small_config, write_csv
from version import get_version


@pytest.fixture(autouse=True)
def no_signal_handlers():
    with patch('manager.ExperimentManager.setup_signal_handlers'):
        yield


@pytest.fixture
def dataset_file(tmp_path):
    return write_csv(tmp_path / "synthetic.csv", make_regression(60, 3, seed=3))


def cli(*argv):
    return vars(build_parser().parse_args(['run', *argv]))


class TestOptions:
    def test_defaults(self):
        options = merge_options(cli('--dataset', 'x.csv'))
        assert options['runs'] == 30
        assert options['generations'] == 200
        assert options['pop_size'] == 100
        assert options['aprt'] == 'half'

    def test_cli_overrides_manifest(self, tmp_path):
        manifest = tmp_path / "experiment.env"
        manifest.write_text("runs=3\ngenerations=4\nms=1\n")
        options = merge_options(cli('--config', str(manifest), '--runs', '5'))
        assert options['runs'] == 5
        assert options['generations'] == 4
        assert options['ms'] == 1.0

    def test_manifest_types(self, tmp_path):
        manifest = tmp_path / "experiment.env"
        manifest.write_text("apot=yes\nspan_grid=0.3,1\npop-size=12\n")
        options = parse_manifest(str(manifest))
        assert options == {'apot': True, 'span_grid': [0.3, 1.0], 'pop_size': 12}

    def test_unknown_manifest_key(self, tmp_path):
        manifest = tmp_path / "experiment.env"
        manifest.write_text("colour=blue\n")
        with pytest.raises(ConfigurationError):
            parse_manifest(str(manifest))

    def test_bad_manifest_value(self, tmp_path):
        manifest = tmp_path / "experiment.env"
        manifest.write_text("runs=many\n")
        with pytest.raises(ConfigurationError):
            parse_manifest(str(manifest))

    def test_recommended_settings(self):
        options = merge_options(cli('--dataset', 'ld50', '--use-recommended'))
        assert options['p_inflate'] == 0.3
        assert options['apot'] is False
        options = merge_options(cli('--dataset', 'airfoil', '--use-recommended'))
        assert options['p_inflate'] == 0.7
        assert options['apot'] is True

    def test_cli_beats_recommended(self):
        options = merge_options(cli('--dataset', 'ld50', '--use-recommended', '--p-inflate', '0.9'))
        assert options['p_inflate'] == 0.9

    def test_recommended_ignored_unless_requested(self):
        assert merge_options(cli('--dataset', 'ld50'))['p_inflate'] == DEFAULT_OPTIONS['p_inflate']

    def test_cli_turns_off_manifest_apot(self, tmp_path):
        manifest = tmp_path / "experiment.env"
        manifest.write_text("apot=true\n")
        assert merge_options(cli('--config', str(manifest)))['apot'] is True
        assert merge_options(cli('--config', str(manifest), '--no-apot'))['apot'] is False

    def test_apot_flag_unset_keeps_default(self):
        assert cli('--dataset', 'x.csv')['apot'] is None
        assert merge_options(cli('--dataset', 'x.csv'))['apot'] is False
        assert merge_options(cli('--dataset', 'x.csv', '--apot'))['apot'] is True

    def test_cli_turns_off_manifest_recommendations(self, tmp_path):
        manifest = tmp_path / "experiment.env"
        manifest.write_text("dataset=ld50\nuse_recommended=true\n")
        assert merge_options(cli('--config', str(manifest)))['p_inflate'] == 0.3
        options = merge_options(cli('--config', str(manifest), '--no-use-recommended'))
        assert options['p_inflate'] == DEFAULT_OPTIONS['p_inflate']


class TestBuildSpec:
    def test_spec_from_options(self, dataset_file, tmp_path):
        options = dict(DEFAULT_OPTIONS, dataset=str(dataset_file), runs=4, aprt='ALL', jobs=2)
        spec = build_spec(options)
        assert spec.runs == 4
        assert spec.jobs == 2
        assert spec.cfg.aprt_mode.value == 'all'
        assert spec.label == "synthetic"
        assert spec.output_dir.name == "synthetic__main"

    def test_registered_dataset_resolves_to_data_dir(self, monkeypatch, tmp_path):
        monkeypatch.setattr(Settings, 'DATA_DIR', str(tmp_path))
        spec = build_spec(dict(DEFAULT_OPTIONS, dataset='ld50', ablation='prob'))
        assert spec.dataset_path == tmp_path / "ld50.csv"
        assert spec.ablation is Ablation.PROB
        assert spec.output_dir.name == "ld50__prob"

    @pytest.mark.parametrize("overrides", [
        {'aprt': 'sometimes'},
        {'ablation': 'everything'},
        {'p_inflate': 1.5},
        {'dataset': None},
    ])
    def test_invalid_options(self, dataset_file, overrides):
        options = dict(DEFAULT_OPTIONS, dataset=str(dataset_file))
        options.update(overrides)
        with pytest.raises(ConfigurationError):
            build_spec(options)


class TestExperimentManager:
    @pytest.fixture
    def spec(self, dataset_file, tmp_path):
        return ExperimentSpec(
            dataset_path=dataset_file, runs=2, cfg=small_config(generations=2), output_dir=tmp_path / "out",
        )

    @pytest.mark.asyncio
    async def test_run_writes_results(self, spec):
        manager = ExperimentManager(spec)
        report = await manager.run()
        assert report.exit_code == 0
        assert report.completed == 2
        rows = ResultWriter(spec.output_dir).read_table(
            ResultWriter.table_name("synthetic", "main", "nevo-gspt", "final")
        )
        assert sorted(int(r['run_id']) for r in rows) == [0, 1]

    @pytest.mark.asyncio
    async def test_second_run_replaces_earlier_tables(self, spec):
        await ExperimentManager(spec).run()
        await ExperimentManager(spec).run()
        writer = ResultWriter(spec.output_dir)
        rows = writer.read_table(ResultWriter.table_name("synthetic", "main", "nevo-gspt", "final"))
        assert sorted(int(r['run_id']) for r in rows) == [0, 1]
        assert len(writer.read_table(ResultWriter.table_name("synthetic", "main", "nn", "final"))) == 2

    @pytest.mark.asyncio
    async def test_shutdown_abandons_pending_runs(self, spec):
        def slow_run(task):
            time.sleep(0.5)
            return RunOutcome(task.run_id, task.variant.name)

        manager = ExperimentManager(spec)
        manager.poll_interval = 0.05
        manager.request_shutdown()
        with patch('manager.execute_run', slow_run):
            report = await manager.run()
        assert report.failed == 2
        assert report.exit_code == 1
        errors = ResultWriter(spec.output_dir).read_table('errors.csv')
        assert {e['error_type'] for e in errors} == {"Interrupted"}

    @pytest.mark.asyncio
    async def test_worker_crash_becomes_failed_run(self, spec):
        def crash(task):
            raise MemoryError("worker lost")

        with patch('manager.execute_run', crash):
            report = await ExperimentManager(spec).run()
        assert report.failed == 2
        errors = ResultWriter(spec.output_dir).read_table('errors.csv')
        assert [e['error_type'] for e in errors] == ["MemoryError"] * 2


class TestMain:
    def test_end_to_end_run(self, dataset_file, tmp_path):
        out = tmp_path / "results"
        code = main([
            'run', '--dataset', str(dataset_file), '--runs', '2', '--generations', '2', '--pop-size', '6',
            '--aprt', 'none', '--epochs', '3', '--jobs', '1', '--out', str(out),
        ])
        assert code == EXIT_OK
        assert (out / "synthetic__main__nevo-gspt__final.csv").exists()
        assert (out / "synthetic__main__nn__final.csv").exists()

    def test_unknown_manifest_key_exits_with_config_code(self, tmp_path):
        manifest = tmp_path / "experiment.env"
        manifest.write_text("colour=blue\n")
        assert main(['run', '--config', str(manifest)]) == EXIT_CONFIG

    def test_missing_dataset_exits_with_ingestion_code(self, tmp_path):
        code = main(['run', '--dataset', str(tmp_path / "absent.csv"), '--jobs', '1', '--out', str(tmp_path)])
        assert code == EXIT_INGESTION

    def test_version(self, capsys):
        with pytest.raises(SystemExit):
            main(['--version'])
        assert get_version() in capsys.readouterr().out

    def test_verify_data_shape_mismatch(self, monkeypatch, tmp_path):
        monkeypatch.setattr(Settings, 'DATA_DIR', str(tmp_path))
        write_csv(tmp_path / "airfoil.csv", make_regression(20, 5))
        assert main(['verify-data', '--dataset', 'airfoil']) == EXIT_INGESTION

    def test_verify_data_missing_files_are_skipped(self, monkeypatch, tmp_path):
        monkeypatch.setattr(Settings, 'DATA_DIR', str(tmp_path))
        assert main(['verify-data']) == EXIT_OK

    def test_verify_data_unknown_name(self):
        assert main(['verify-data', '--dataset', 'iris']) == EXIT_CONFIG

    def test_splits_are_deterministic(self, dataset_file, capsys):
        def split_lines():
            assert main(['splits', '--dataset', str(dataset_file), '--runs', '2', '--seed', '5']) == EXIT_OK
            out = capsys.readouterr().out.splitlines()
            return [line for line in out if line.startswith(('run_id,', '0,', '1,'))]

        first = split_lines()
        assert first[0] == "run_id,part,indices"
        assert len(first) == 5
        assert first == split_lines()
