"""End-to-end command-line tests through cli.main(argv).

Each subcommand is exercised against real files in tmp_path; assertions
cover exit codes, the ``# key=value`` metadata headers, option resolution
(flags > config > defaults), and bit-reproducibility across runs, seed
placements, and worker counts.
"""

import numpy as np
import pytest

from omicsmr import __version__, kernels
from omicsmr.cli import main
from omicsmr.ld import LdMatrix, serialize_ld_file
from omicsmr.simgen import SimSpec, generate, write_files

from conftest import make_record, write_assoc_tsv


def read_meta(path):
    """Leading '# key=value' lines as a dict, plus the remaining lines."""
    meta, body = {}, []
    for line in path.read_text().splitlines():
        if line.startswith("# ") and not body:
            key, _, value = line[2:].partition("=")
            meta[key] = value
        else:
            body.append(line)
    return meta, body


def mr_records(n=10, slope=0.5, noise_seed=5):
    rng = np.random.default_rng(noise_seed)
    exp, out = [], []
    for i in range(n):
        bx = 0.15 + 0.02 * i
        by = slope * bx + float(rng.normal(0, 0.002))
        pos = 1_000_000 + i * 50_000
        exp.append(make_record(f"rs{i}", pos=pos, beta=bx, se=0.01,
                               pvalue=1e-10))
        out.append(make_record(f"rs{i}", pos=pos, beta=by, se=0.01,
                               pvalue=1e-4))
    return exp, out


@pytest.fixture
def mr_files(tmp_path):
    exp, out = mr_records()
    e_path = tmp_path / "exposure.tsv"
    o_path = tmp_path / "outcome.tsv"
    write_assoc_tsv(e_path, exp)
    write_assoc_tsv(o_path, out)
    return e_path, o_path


def bma_combined_file(tmp_path, k=4, n=40, seed=3, name="panel.tsv"):
    rng = np.random.default_rng(seed)
    truth = np.zeros(k)
    truth[0] = 0.5
    if k > 3:
        truth[3] = -0.4
    x = rng.normal(0.0, 3.0, size=(n, k))
    y = x @ truth + rng.normal(0.0, 1.0, size=n)
    path = tmp_path / name
    header = ["rsid"] + [f"g{j + 1}" for j in range(k)] + ["beta_y", "se_y"]
    lines = ["\t".join(header)]
    for i in range(n):
        fields = ([f"rs{i}"] + [repr(float(v)) for v in x[i]]
                  + [repr(float(y[i])), "1.0"])
        lines.append("\t".join(fields))
    path.write_text("\n".join(lines) + "\n")
    return path


class TestTopLevel:
    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0
        assert __version__ in capsys.readouterr().out

    def test_missing_subcommand_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2

    def test_unknown_subcommand(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2


class TestMrCommand:
    def test_default_runs_full_ladder(self, mr_files, tmp_path):
        e_path, o_path = mr_files
        out = tmp_path / "report.tsv"
        assert main(["mr", "--exposure", str(e_path), "--outcome",
                     str(o_path), "--out", str(out)]) == 0
        meta, body = read_meta(out)
        assert meta["omicsmr"] == __version__
        assert meta["command"] == "mr"
        assert meta["backend"] == kernels.BACKEND
        assert meta["seed"] == "0"
        assert meta["methods"] == "all"
        assert body[0].split("\t") == ["method", "estimate", "se",
                                       "pvalue", "n_snps"]
        methods = [ln.split("\t")[0] for ln in body[1:]]
        assert methods == ["ivw", "egger_slope", "egger_intercept",
                           "weighted_median"]

    def test_single_method_selection(self, mr_files, tmp_path):
        e_path, o_path = mr_files
        out = tmp_path / "ivw.tsv"
        assert main(["mr", "--exposure", str(e_path), "--outcome",
                     str(o_path), "--methods", "ivw", "--out",
                     str(out)]) == 0
        _, body = read_meta(out)
        assert [ln.split("\t")[0] for ln in body[1:]] == ["ivw"]

    def test_wald_ratio_emits_one_row_per_snp(self, mr_files, tmp_path):
        e_path, o_path = mr_files
        out = tmp_path / "wald.tsv"
        assert main(["mr", "--exposure", str(e_path), "--outcome",
                     str(o_path), "--methods", "wald_ratio", "--out",
                     str(out)]) == 0
        _, body = read_meta(out)
        assert len(body) - 1 == 10

    def test_unknown_method_is_config_error(self, mr_files, tmp_path,
                                            capsys):
        e_path, o_path = mr_files
        code = main(["mr", "--exposure", str(e_path), "--outcome",
                     str(o_path), "--methods", "bogus", "--out",
                     str(tmp_path / "x.tsv")])
        assert code == 1
        assert "bogus" in capsys.readouterr().err

    def test_egger_with_two_snps_exits_5(self, tmp_path, capsys):
        exp, out = mr_records(n=2)
        e_path, o_path = tmp_path / "e.tsv", tmp_path / "o.tsv"
        write_assoc_tsv(e_path, exp)
        write_assoc_tsv(o_path, out)
        code = main(["mr", "--exposure", str(e_path), "--outcome",
                     str(o_path), "--methods", "egger", "--out",
                     str(tmp_path / "x.tsv")])
        assert code == 5
        assert "3" in capsys.readouterr().err

    def test_missing_input_file_exits_2(self, tmp_path):
        code = main(["mr", "--exposure", str(tmp_path / "absent.tsv"),
                     "--outcome", str(tmp_path / "also_absent.tsv"),
                     "--out", str(tmp_path / "x.tsv")])
        assert code == 2

    def test_list_methods(self, capsys):
        assert main(["mr", "--list-methods"]) == 0
        out = capsys.readouterr().out.split()
        assert out == ["wald_ratio", "ivw", "egger", "weighted_median"]

    def test_byte_reproducible(self, mr_files, tmp_path):
        e_path, o_path = mr_files
        a, b = tmp_path / "a.tsv", tmp_path / "b.tsv"
        argv = ["mr", "--exposure", str(e_path), "--outcome", str(o_path)]
        assert main(argv + ["--out", str(a)]) == 0
        assert main(argv + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_seed_flag_respected_in_either_position(self, mr_files,
                                                    tmp_path):
        e_path, o_path = mr_files
        before, after = tmp_path / "before.tsv", tmp_path / "after.tsv"
        assert main(["--seed", "11", "mr", "--exposure", str(e_path),
                     "--outcome", str(o_path), "--out", str(before)]) == 0
        assert main(["mr", "--exposure", str(e_path), "--outcome",
                     str(o_path), "--seed", "11", "--out",
                     str(after)]) == 0
        assert before.read_bytes() == after.read_bytes()
        meta, _ = read_meta(before)
        assert meta["seed"] == "11"


class TestConfigResolution:
    def test_config_supplies_defaults(self, mr_files, tmp_path):
        e_path, o_path = mr_files
        cfg = tmp_path / "run.cfg"
        cfg.write_text("seed=42\nn_boot=250\n")
        out = tmp_path / "report.tsv"
        assert main(["--config", str(cfg), "mr", "--exposure", str(e_path),
                     "--outcome", str(o_path), "--out", str(out)]) == 0
        meta, _ = read_meta(out)
        assert meta["seed"] == "42"
        assert meta["n_boot"] == "250"

    def test_cli_flag_beats_config(self, mr_files, tmp_path):
        e_path, o_path = mr_files
        cfg = tmp_path / "run.cfg"
        cfg.write_text("seed=42\n")
        out = tmp_path / "report.tsv"
        assert main(["--config", str(cfg), "--seed", "7", "mr",
                     "--exposure", str(e_path), "--outcome", str(o_path),
                     "--out", str(out)]) == 0
        meta, _ = read_meta(out)
        assert meta["seed"] == "7"

    def test_dashes_normalized_in_config_keys(self, mr_files, tmp_path):
        e_path, o_path = mr_files
        cfg = tmp_path / "run.cfg"
        cfg.write_text("n-boot=321\n")
        out = tmp_path / "report.tsv"
        assert main(["--config", str(cfg), "mr", "--exposure", str(e_path),
                     "--outcome", str(o_path), "--out", str(out)]) == 0
        meta, _ = read_meta(out)
        assert meta["n_boot"] == "321"

    def test_unknown_config_key_exits_1(self, mr_files, tmp_path, capsys):
        e_path, o_path = mr_files
        cfg = tmp_path / "run.cfg"
        cfg.write_text("sneed=1\n")
        code = main(["--config", str(cfg), "mr", "--exposure", str(e_path),
                     "--outcome", str(o_path),
                     "--out", str(tmp_path / "x.tsv")])
        assert code == 1
        assert "sneed" in capsys.readouterr().err

    def test_missing_config_file_exits_1(self, mr_files, tmp_path):
        e_path, o_path = mr_files
        code = main(["--config", str(tmp_path / "absent.cfg"), "mr",
                     "--exposure", str(e_path), "--outcome", str(o_path),
                     "--out", str(tmp_path / "x.tsv")])
        assert code == 1

    def test_malformed_config_line_exits_1(self, mr_files, tmp_path):
        e_path, o_path = mr_files
        cfg = tmp_path / "run.cfg"
        cfg.write_text("seed 42\n")
        code = main(["--config", str(cfg), "mr", "--exposure", str(e_path),
                     "--outcome", str(o_path),
                     "--out", str(tmp_path / "x.tsv")])
        assert code == 1


class TestTwmrCommand:
    @pytest.fixture
    def sim_stem(self, tmp_path):
        spec = SimSpec(n_snps=30, k_exposures=2, true_alpha=(0.4, -0.1),
                       ld_rho=0.3, seed=9)
        write_files(generate(spec), tmp_path / "inst")
        return tmp_path / "inst"

    def test_writes_alpha_file(self, sim_stem):
        assert main(["twmr", str(sim_stem)]) == 0
        alpha = sim_stem.parent / "inst.alpha"
        meta, body = read_meta(alpha)
        assert meta["command"] == "twmr"
        assert meta["n_gwas"] == "100000.0"
        assert body[0].split("\t") == ["gene", "alpha", "SE", "P",
                                       "Nsnps", "Ngene"]
        assert [ln.split("\t")[0] for ln in body[1:]] == ["gene1", "gene2"]

    def test_custom_output_path(self, sim_stem, tmp_path):
        out = tmp_path / "custom.alpha"
        assert main(["twmr", str(sim_stem), "--out", str(out)]) == 0
        assert out.exists()

    def test_missing_matrix_exits_2(self, tmp_path):
        assert main(["twmr", str(tmp_path / "nothing")]) == 2

    def test_dimension_mismatch_exits_3_naming_both_files(self, sim_stem,
                                                          capsys):
        bad_ld = LdMatrix.identity(4)
        serialize_ld_file(bad_ld, sim_stem.parent / "inst.ld")
        code = main(["twmr", str(sim_stem)])
        assert code == 3
        err = capsys.readouterr().err
        assert "inst.matrix" in err
        assert "inst.ld" in err
        assert not (sim_stem.parent / "inst.alpha").exists()

    def test_collinear_design_exits_4(self, tmp_path):
        matrix = tmp_path / "bad.matrix"
        lines = ["GENES\tg1\tg2\tBETA_GWAS"]
        rng = np.random.default_rng(0)
        for i in range(10):
            v = rng.normal(0, 0.3)
            lines.append(f"rs{i}\t{v!r}\t{v!r}\t{rng.normal(0, 0.1)!r}")
        matrix.write_text("\n".join(lines) + "\n")
        serialize_ld_file(LdMatrix.identity(10),
                          tmp_path / "bad.ld")
        assert main(["twmr", str(tmp_path / "bad")]) == 4

    def test_byte_reproducible(self, sim_stem, tmp_path):
        a, b = tmp_path / "a.alpha", tmp_path / "b.alpha"
        assert main(["twmr", str(sim_stem), "--out", str(a)]) == 0
        assert main(["twmr", str(sim_stem), "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()


class TestBmaCommand:
    def test_default_kmax_exceeding_panel_exits_1(self, tmp_path, capsys):
        path = bma_combined_file(tmp_path)
        code = main(["bma", "--input", str(path),
                     "--out-models", str(tmp_path / "m.tsv"),
                     "--out-mip", str(tmp_path / "p.tsv")])
        assert code == 1
        assert "kmax" in capsys.readouterr().err

    def test_stochastic_run(self, tmp_path):
        path = bma_combined_file(tmp_path)
        models, mip = tmp_path / "m.tsv", tmp_path / "p.tsv"
        assert main(["bma", "--input", str(path), "--kmax", "4",
                     "--max-iter", "300",
                     "--out-models", str(models),
                     "--out-mip", str(mip)]) == 0
        meta, body = read_meta(models)
        assert meta["command"] == "bma"
        assert meta["mode"] == "stochastic"
        assert body[0].split("\t") == ["rank", "members", "size", "log_ml",
                                       "log_prior", "posterior", "theta"]
        top = body[1].split("\t")
        assert top[0] == "1"
        assert "g1" in top[1] and "g4" in top[1]

        mip_meta, mip_body = read_meta(mip)
        assert mip_meta["mode"] == "stochastic"
        header = mip_body[0].split("\t")
        assert header == ["exposure", "mip", "mace", "mip_visit_freq"]
        rows = {ln.split("\t")[0]: ln.split("\t") for ln in mip_body[1:]}
        assert set(rows) == {"g1", "g2", "g3", "g4"}
        assert float(rows["g1"][1]) > 0.95
        assert float(rows["g4"][1]) > 0.95

    def test_exhaustive_mode_has_no_visit_column(self, tmp_path):
        path = bma_combined_file(tmp_path)
        models, mip = tmp_path / "m.tsv", tmp_path / "p.tsv"
        assert main(["bma", "--input", str(path), "--kmin", "2",
                     "--kmax", "2",
                     "--out-models", str(models),
                     "--out-mip", str(mip)]) == 0
        meta, body = read_meta(models)
        assert meta["mode"] == "exhaustive"
        assert len(body) - 1 == 6  # C(4, 2)
        _, mip_body = read_meta(mip)
        assert mip_body[0].split("\t") == ["exposure", "mip", "mace"]

    def test_top_clamps_model_rows(self, tmp_path):
        path = bma_combined_file(tmp_path)
        models, mip = tmp_path / "m.tsv", tmp_path / "p.tsv"
        assert main(["bma", "--input", str(path), "--kmin", "1",
                     "--kmax", "1", "--top", "10",
                     "--out-models", str(models),
                     "--out-mip", str(mip)]) == 0
        _, body = read_meta(models)
        assert len(body) - 1 == 4  # only 4 size-1 models exist

    def test_two_file_input(self, tmp_path):
        combined = bma_combined_file(tmp_path)
        lines = combined.read_text().splitlines()
        header = lines[0].split("\t")
        k = len(header) - 3
        x_path, y_path = tmp_path / "bx.tsv", tmp_path / "by.tsv"
        x_rows = ["\t".join(["rsid"] + header[1:1 + k])]
        y_rows = ["rsid\tbeta\tse"]
        for ln in lines[1:]:
            f = ln.split("\t")
            x_rows.append("\t".join([f[0]] + f[1:1 + k]))
            y_rows.append("\t".join([f[0], f[-2], f[-1]]))
        x_path.write_text("\n".join(x_rows) + "\n")
        y_path.write_text("\n".join(y_rows) + "\n")

        out_a = (tmp_path / "ma.tsv", tmp_path / "pa.tsv")
        out_b = (tmp_path / "mb.tsv", tmp_path / "pb.tsv")
        assert main(["bma", "--input", str(combined), "--kmin", "2",
                     "--kmax", "2", "--out-models", str(out_a[0]),
                     "--out-mip", str(out_a[1])]) == 0
        assert main(["bma", "--beta-x", str(x_path), "--beta-y",
                     str(y_path), "--kmin", "2", "--kmax", "2",
                     "--out-models", str(out_b[0]),
                     "--out-mip", str(out_b[1])]) == 0
        # identical scores regardless of input layout
        _, body_a = read_meta(out_a[0])
        _, body_b = read_meta(out_b[0])
        assert body_a == body_b

    def test_missing_inputs_exit_1(self, tmp_path):
        assert main(["bma", "--out-models", str(tmp_path / "m.tsv"),
                     "--out-mip", str(tmp_path / "p.tsv")]) == 1

    def test_kmax_13_warns(self, tmp_path):
        path = bma_combined_file(tmp_path, k=15, n=50, name="wide.tsv")
        with pytest.warns(UserWarning, match="12"):
            code = main(["bma", "--input", str(path), "--kmax", "13",
                         "--max-iter", "200",
                         "--out-models", str(tmp_path / "m.tsv"),
                         "--out-mip", str(tmp_path / "p.tsv")])
        assert code == 0

    def test_seeded_run_byte_reproducible(self, tmp_path):
        path = bma_combined_file(tmp_path)
        argv = ["bma", "--input", str(path), "--kmax", "4",
                "--max-iter", "300", "--seed", "5"]
        a = (tmp_path / "ma.tsv", tmp_path / "pa.tsv")
        b = (tmp_path / "mb.tsv", tmp_path / "pb.tsv")
        assert main(argv + ["--out-models", str(a[0]),
                            "--out-mip", str(a[1])]) == 0
        assert main(argv + ["--out-models", str(b[0]),
                            "--out-mip", str(b[1])]) == 0
        assert a[0].read_bytes() == b[0].read_bytes()
        assert a[1].read_bytes() == b[1].read_bytes()


class TestClumpCommand:
    @pytest.fixture
    def clump_inputs(self, tmp_path):
        records = [
            make_record("rs1", pos=1_000_000, pvalue=1e-12),
            make_record("rs2", pos=1_040_000, pvalue=1e-9),
            make_record("rs3", pos=1_080_000, pvalue=1e-8),
            make_record("rs4", pos=9_000_000, pvalue=1e-10),
            make_record("rs5", pos=9_030_000, pvalue=1e-9),
        ]
        assoc = tmp_path / "assoc.tsv"
        write_assoc_tsv(assoc, records)
        r = np.eye(5)
        for i, j, v in ((0, 1, 0.9), (0, 2, 0.8), (3, 4, 0.7)):
            r[i, j] = r[j, i] = v
        ld_path = tmp_path / "panel.ld"
        serialize_ld_file(LdMatrix(r), ld_path)
        return assoc, ld_path

    def test_clumps_and_members(self, clump_inputs, tmp_path):
        assoc, ld_path = clump_inputs
        out = tmp_path / "clumps.tsv"
        assert main(["clump", "--assoc", str(assoc), "--ld", str(ld_path),
                     "--clump-p1", "1e-6", "--clump-p2", "1e-6",
                     "--clump-r2", "0.25", "--clump-kb", "100",
                     "--out", str(out)]) == 0
        meta, body = read_meta(out)
        assert meta["command"] == "clump"
        assert meta["n_clumps"] == "2"
        assert body[0].split("\t") == ["index_rsid", "chrom", "pos",
                                       "pvalue", "n_members", "members"]
        rows = {ln.split("\t")[0]: ln.split("\t") for ln in body[1:]}
        assert rows["rs1"][5] == "rs2,rs3"
        assert rows["rs4"][5] == "rs5"

    def test_named_panel_via_snp_list(self, clump_inputs, tmp_path):
        assoc, ld_path = clump_inputs
        snps = tmp_path / "panel.snps"
        snps.write_text("rs1\nrs2\nrs3\nrs4\nrs5\n")
        out = tmp_path / "named.tsv"
        assert main(["clump", "--assoc", str(assoc), "--ld", str(ld_path),
                     "--ld-snps", str(snps), "--clump-p1", "1e-6",
                     "--clump-p2", "1e-6", "--clump-r2", "0.25",
                     "--clump-kb", "100", "--out", str(out)]) == 0
        _, body = read_meta(out)
        assert len(body) - 1 == 2

    def test_singleton_clump_prints_dot(self, clump_inputs, tmp_path):
        assoc, ld_path = clump_inputs
        out = tmp_path / "strict.tsv"
        assert main(["clump", "--assoc", str(assoc), "--ld", str(ld_path),
                     "--clump-p1", "1e-11", "--clump-p2", "1e-11",
                     "--clump-r2", "0.25", "--clump-kb", "100",
                     "--out", str(out)]) == 0
        _, body = read_meta(out)
        assert body[1].split("\t")[5] == "."

    def test_wrong_ld_dimension_exits_3(self, clump_inputs, tmp_path):
        assoc, _ = clump_inputs
        small = tmp_path / "small.ld"
        serialize_ld_file(LdMatrix.identity(2), small)
        assert main(["clump", "--assoc", str(assoc), "--ld", str(small),
                     "--out", str(tmp_path / "x.tsv")]) == 3

    def test_missing_ld_file_exits_2(self, clump_inputs, tmp_path):
        assoc, _ = clump_inputs
        assert main(["clump", "--assoc", str(assoc), "--ld",
                     str(tmp_path / "none.ld"),
                     "--out", str(tmp_path / "x.tsv")]) == 2


class TestPqtlPipelineCommand:
    @pytest.fixture
    def pipeline_inputs(self, tmp_path):
        p1 = [
            make_record("rs1", chrom="2", pos=10_050_000, beta=0.25,
                        se=0.02, pvalue=1e-12),
            make_record("rs2", chrom="9", pos=40_000_000, beta=0.30,
                        se=0.02, pvalue=1e-11),
        ]
        p2 = [
            make_record("rs3", chrom="9", pos=49_700_000, beta=0.20,
                        se=0.02, pvalue=1e-10),
            make_record("rs4", chrom="9", pos=50_100_000, beta=0.22,
                        se=0.02, pvalue=1e-9),
        ]
        outcome = [
            make_record("rs1", chrom="2", pos=10_050_000, beta=0.10,
                        se=0.01, pvalue=1e-9),
            make_record("rs2", chrom="9", pos=40_000_000, beta=0.12,
                        se=0.01, pvalue=1e-8),
            make_record("rs3", chrom="9", pos=49_700_000, beta=0.08,
                        se=0.01, pvalue=1e-7),
            make_record("rs4", chrom="9", pos=50_100_000, beta=0.09,
                        se=0.01, pvalue=1e-7),
        ]
        paths = {
            "p1": tmp_path / "p1.tsv",
            "p2": tmp_path / "p2.tsv",
            "outcome": tmp_path / "outcome.tsv",
        }
        write_assoc_tsv(paths["p1"], p1)
        write_assoc_tsv(paths["p2"], p2)
        write_assoc_tsv(paths["outcome"], outcome)
        ann = tmp_path / "annotation.tsv"
        ann.write_text(
            "gene\tchrom\ttss\tprotein\n"
            "G1\t2\t10000000\tP1\n"
            "G2\t9\t50000000\tP2\n")
        paths["annotation"] = ann
        ld = tmp_path / "panel.ld"
        serialize_ld_file(LdMatrix.identity(4), ld)
        paths["ld"] = ld
        snps = tmp_path / "panel.snps"
        snps.write_text("rs1\nrs2\nrs3\nrs4\n")
        paths["snps"] = snps
        return paths

    def argv(self, paths, out):
        return ["pqtl-pipeline",
                "--pqtl", f"P1={paths['p1']}",
                "--pqtl", f"P2={paths['p2']}",
                "--outcome", str(paths["outcome"]),
                "--annotation", str(paths["annotation"]),
                "--ld", str(paths["ld"]),
                "--ld-snps", str(paths["snps"]),
                "--out", str(out)]

    def test_report_written(self, pipeline_inputs, tmp_path):
        out = tmp_path / "report.tsv"
        assert main(self.argv(pipeline_inputs, out)) == 0
        meta, body = read_meta(out)
        assert meta["command"] == "pqtl-pipeline"
        assert meta["proteins"] == "P1,P2"
        assert meta["bonferroni_p"] == repr(0.05 / 4)
        assert body[0].split("\t") == ["protein", "mode", "method",
                                       "estimate", "se", "pvalue",
                                       "n_snps", "consistent"]
        p1_modes = {ln.split("\t")[1] for ln in body[1:]
                    if ln.startswith("P1\t")}
        assert p1_modes == {"cis_only", "cis_plus_trans", "trans_only"}
        assert {ln.split("\t")[7] for ln in body[1:]} == {"true"}

    def test_jobs_do_not_change_bytes(self, pipeline_inputs, tmp_path):
        a, b = tmp_path / "a.tsv", tmp_path / "b.tsv"
        assert main(self.argv(pipeline_inputs, a) + ["--jobs", "1"]) == 0
        assert main(self.argv(pipeline_inputs, b) + ["--jobs", "4"]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_missing_pqtl_flag_exits_1(self, pipeline_inputs, tmp_path):
        argv = self.argv(pipeline_inputs, tmp_path / "x.tsv")
        del argv[1:5]  # strip both --pqtl options
        assert main(argv) == 1

    def test_malformed_pqtl_entry_exits_1(self, pipeline_inputs, tmp_path):
        argv = self.argv(pipeline_inputs, tmp_path / "x.tsv")
        argv[2] = "P1"  # no =PATH
        assert main(argv) == 1

    def test_missing_ld_snps_exits_1(self, pipeline_inputs, tmp_path):
        argv = self.argv(pipeline_inputs, tmp_path / "x.tsv")
        i = argv.index("--ld-snps")
        del argv[i:i + 2]
        assert main(argv) == 1


class TestMediateCommand:
    @pytest.fixture
    def mediation_inputs(self, tmp_path):
        step1_exp = [make_record(f"rs{i}", pos=1_000_000 + i * 10_000,
                                 beta=0.5, se=0.01, pvalue=1e-10)
                     for i in range(2)]
        step1_med = [make_record(f"rs{i}", pos=1_000_000 + i * 10_000,
                                 beta=0.25, se=0.01, pvalue=1e-6)
                     for i in range(2)]
        step2_med = [make_record(f"rs{10 + i}", pos=2_000_000 + i * 10_000,
                                 beta=0.4, se=0.01, pvalue=1e-8)
                     for i in range(2)]
        step2_out = [make_record(f"rs{10 + i}", pos=2_000_000 + i * 10_000,
                                 beta=0.16, se=0.01, pvalue=1e-5)
                     for i in range(2)]
        paths = {}
        for name, records in (("s1e", step1_exp), ("s1m", step1_med),
                              ("s2m", step2_med), ("s2o", step2_out)):
            paths[name] = tmp_path / f"{name}.tsv"
            write_assoc_tsv(paths[name], records)
        return paths

    def argv(self, paths, out, **extra):
        base = ["mediate",
                "--step1-exposure", str(paths["s1e"]),
                "--step1-mediator", str(paths["s1m"]),
                "--step2-mediator", str(paths["s2m"]),
                "--step2-outcome", str(paths["s2o"]),
                "--out", str(out)]
        for key, value in extra.items():
            base.extend([f"--{key.replace('_', '-')}", str(value)])
        return base

    def test_mediation_row(self, mediation_inputs, tmp_path):
        out = tmp_path / "mediation.tsv"
        assert main(self.argv(mediation_inputs, out, exposure_name="bmi",
                              cpg="cg0001", outcome_name="cad")) == 0
        meta, body = read_meta(out)
        assert meta["command"] == "mediate"
        header = body[0].split("\t")
        assert header == [
            "exposure", "cpg_site", "outcome",
            "step1_method", "step1_estimate", "step1_se", "step1_pvalue",
            "step2_method", "step2_estimate", "step2_se", "step2_pvalue",
            "indirect_estimate", "indirect_se", "is_mediator",
            "instruments_overlap"]
        row = dict(zip(header, body[1].split("\t")))
        assert row["exposure"] == "bmi"
        assert row["cpg_site"] == "cg0001"
        assert row["outcome"] == "cad"
        assert row["step1_method"] == "ivw"
        assert float(row["step1_estimate"]) == pytest.approx(0.5)
        assert float(row["step2_estimate"]) == pytest.approx(0.4)
        assert float(row["indirect_estimate"]) == pytest.approx(0.2)
        assert row["is_mediator"] == "true"
        assert row["instruments_overlap"] == "false"

    def test_overlap_flag(self, mediation_inputs, tmp_path):
        # step 2 reuses step 1's SNPs
        paths = dict(mediation_inputs)
        paths["s2m"] = paths["s1e"]
        paths["s2o"] = paths["s1m"]
        out = tmp_path / "overlap.tsv"
        assert main(self.argv(paths, out)) == 0
        _, body = read_meta(out)
        assert body[1].split("\t")[-1] == "true"

    def test_missing_file_exits_2(self, mediation_inputs, tmp_path):
        paths = dict(mediation_inputs)
        paths["s2o"] = tmp_path / "absent.tsv"
        assert main(self.argv(paths, tmp_path / "x.tsv")) == 2


class TestSimulateCommand:
    def test_writes_three_files(self, tmp_path):
        stem = tmp_path / "sim"
        assert main(["simulate", "--n-snps", "25", "--true-alpha",
                     "0.3,0.0,-0.2", "--ld-rho", "0.4", "--stem",
                     str(stem)]) == 0
        assert (tmp_path / "sim.matrix").exists()
        assert (tmp_path / "sim.ld").exists()
        assert (tmp_path / "sim.simmeta").exists()

    def test_seed_position_equivalence(self, tmp_path):
        argv_tail = ["--n-snps", "20", "--true-alpha", "0.5,-0.5",
                     "--ld-rho", "0.2"]
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["--seed", "11", "simulate"] + argv_tail
                    + ["--stem", str(a)]) == 0
        assert main(["simulate"] + argv_tail
                    + ["--seed", "11", "--stem", str(b)]) == 0
        for ext in (".matrix", ".ld", ".simmeta"):
            left = (tmp_path / ("a" + ext)).read_text()
            right = (tmp_path / ("b" + ext)).read_text()
            assert left == right

    def test_seed_changes_output(self, tmp_path):
        argv_tail = ["--n-snps", "20", "--true-alpha", "0.5"]
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["simulate", "--seed", "1"] + argv_tail
                    + ["--stem", str(a)]) == 0
        assert main(["simulate", "--seed", "2"] + argv_tail
                    + ["--stem", str(b)]) == 0
        assert (tmp_path / "a.matrix").read_bytes() != (
            tmp_path / "b.matrix").read_bytes()

    def test_k_comes_from_alpha_list(self, tmp_path):
        stem = tmp_path / "sim"
        assert main(["simulate", "--n-snps", "10", "--true-alpha",
                     "0.1,0.2,0.3,0.4", "--stem", str(stem)]) == 0
        meta = (tmp_path / "sim.simmeta").read_text()
        assert "k_exposures=4" in meta

    def test_invalid_rho_exits_1(self, tmp_path):
        assert main(["simulate", "--n-snps", "10", "--true-alpha", "0.1",
                     "--ld-rho", "1.0", "--stem",
                     str(tmp_path / "sim")]) == 1
