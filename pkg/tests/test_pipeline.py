import pytest

from nextedit.core import Edit, EditSession, Project, apply_edit
from nextedit.pipeline import NEURAL, TOOL, EngineConfig, Recommendation, step


def session_with(*edits):
    s = EditSession(project_root=".")
    for e in edits:
        s = s.extended(e)
    return s


class TestSignaturePropagation:
    """A Go signature gains a parameter; the engine must surface both call
    sites, including the cross-file one, via reference lookup."""

    def test_def_use_recommends_both_call_sites(self, chunk_project, chunk_h1_edit):
        project = apply_edit(chunk_project, chunk_h1_edit)
        recs = step(session_with(chunk_h1_edit), project)
        top3 = recs[:3]
        spots = {(r.file, r.span) for r in top3}
        assert ("executor/window.go", (11, 11)) in spots
        assert ("util/chunk/row.go", (4, 4)) in spots

    def test_same_file_call_site_ranks_before_cross_file(self, chunk_project, chunk_h1_edit):
        project = apply_edit(chunk_project, chunk_h1_edit)
        recs = step(session_with(chunk_h1_edit), project)
        order = [(r.file, r.span) for r in recs]
        assert order.index(("executor/window.go", (11, 11))) < order.index(
            ("util/chunk/row.go", (4, 4))
        )

    def test_tool_recommendations_carry_confidence_one(self, chunk_project, chunk_h1_edit):
        project = apply_edit(chunk_project, chunk_h1_edit)
        for rec in step(session_with(chunk_h1_edit), project):
            if rec.provenance == TOOL:
                assert rec.confidence == 1.0

    def test_definition_line_not_recommended(self, chunk_project, chunk_h1_edit):
        project = apply_edit(chunk_project, chunk_h1_edit)
        recs = step(session_with(chunk_h1_edit), project)
        assert all(
            not (r.file == "executor/window.go" and r.span == (3, 3)) for r in recs
        )


class TestClonePropagation:
    """Rewriting one inspect.signature condition should surface the two
    remaining clone sites with exact generated content."""

    def _project_and_session(self, sampler_project, sampler_h1_edit):
        project = apply_edit(sampler_project, sampler_h1_edit)
        return project, session_with(sampler_h1_edit)

    def test_clone_sites_recommended(self, sampler_project, sampler_h1_edit):
        project, session = self._project_and_session(sampler_project, sampler_h1_edit)
        recs = step(session, project)
        spans = {r.span for r in recs if r.file == "modules/sampler.py"}
        # H1 grew the file by 2 lines, so the clone sites sit at 14 and 16
        assert (14, 14) in spans and (16, 16) in spans

    def test_template_content_is_exact(self, sampler_project, sampler_h1_edit):
        project, session = self._project_and_session(sampler_project, sampler_h1_edit)
        recs = step(session, project)
        by_span = {r.span: r for r in recs if r.file == "modules/sampler.py"}
        assert by_span[(14, 14)].candidates[0].post_code == (
            "        if 'n' in parameters:",
        )
        assert by_span[(16, 16)].candidates[0].post_code == (
            "        if 'sigma_sched' in parameters:",
        )

    def test_clone_recommendations_are_tool_provenance(self, sampler_project, sampler_h1_edit):
        project, session = self._project_and_session(sampler_project, sampler_h1_edit)
        recs = step(session, project)
        assert all(r.provenance == TOOL for r in recs[:2])
        assert all(r.service == "clone" for r in recs[:2])


class TestUsageChangeGuard:
    def test_usage_change_does_not_mass_rename(self, chunk_project, chunk_h1_edit):
        project = apply_edit(chunk_project, chunk_h1_edit)
        h2 = Edit(
            file="executor/window.go",
            line_start=6,
            line_end=6,
            code_before=("\tnewChk.requiredRows = cap",),
            code_after=("\tnewChk.requiredRows = maxChunkSize",),
        )
        project2 = apply_edit(project, h2)
        recs = step(session_with(chunk_h1_edit, h2), project2)
        # `cap` still lives at line 5; a confirmed rename would rewrite it
        for rec in recs:
            if rec.service == "rename":
                pytest.fail("rename must be dropped for a usage change")


class TestNeuralFallback:
    def test_no_composition_goes_neural(self):
        project = Project.from_texts(
            {
                "calc.py": "def area(w, h):\n    return w * h\n\n\ndef perimeter(w, h):\n    return 2 * (w + h)\n",
            }
        )
        e = Edit("calc.py", 2, 2, ("    return w * h",), ("    return abs(w * h)",))
        project = apply_edit(project, e)
        recs = step(session_with(e), project)
        assert all(r.provenance == NEURAL for r in recs)

    def test_session_without_edits_rejected(self, sampler_project):
        with pytest.raises(ValueError):
            step(EditSession(project_root="."), sampler_project)


class TestRanking:
    def test_recommendation_confidence_invariant(self):
        with pytest.raises(ValueError):
            Recommendation(
                file="f.py",
                span=(1, 1),
                candidates=(),
                confidence=0.7,
                provenance=TOOL,
            )

    def test_dedupes_by_location(self, sampler_project, sampler_h1_edit):
        project = apply_edit(sampler_project, sampler_h1_edit)
        recs = step(session_with(sampler_h1_edit), project)
        keys = [(r.file, r.span) for r in recs]
        assert len(keys) == len(set(keys))

    def test_blind_mode_fires_without_threshold(self, chunk_project, chunk_h1_edit):
        project = apply_edit(chunk_project, chunk_h1_edit)
        cfg = EngineConfig(invoker_mode="blind")
        recs = step(session_with(chunk_h1_edit), project, cfg)
        assert any(r.provenance == TOOL for r in recs)

    def test_invoker_off_is_pure_neural(self, chunk_project, chunk_h1_edit):
        project = apply_edit(chunk_project, chunk_h1_edit)
        cfg = EngineConfig(invoker_mode="off")
        recs = step(session_with(chunk_h1_edit), project, cfg)
        assert all(r.provenance == NEURAL for r in recs)

    def test_candidate_rediff_stays_within_labelled_positions(
        self, sampler_project, sampler_h1_edit
    ):
        from nextedit.textdiff import diff_lines

        project = apply_edit(sampler_project, sampler_h1_edit)
        recs = step(session_with(sampler_h1_edit), project)
        checked = 0
        for rec in recs:
            if rec.labels is None or not rec.candidates:
                continue
            window = rec.labels.window
            lines = list(project.files[rec.file][rec.span[0] - 1 : rec.span[1]])
            hunks = diff_lines(lines, list(rec.candidates[0].post_code))
            for h in hunks:
                for i in range(len(h.old_lines)):
                    abs_line = rec.span[0] + h.old_start - 1 + i
                    pos = abs_line - window.span[0]
                    assert rec.labels.inline[pos] != "KEEP"
                    checked += 1
        assert checked > 0
