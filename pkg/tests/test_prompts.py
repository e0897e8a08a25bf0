import pytest

from tacnet.prompts import (
    IMAGE_PLACEHOLDER, SYSTEM_PROMPT, ReportSections, assemble, base_instruction, build_prompt,
)


def test_fallback_without_sections():
    system, clinical = build_prompt(ReportSections())
    assert system == SYSTEM_PROMPT
    assert clinical == "Provide a detailed description of the findings in the radiology image."


def test_context_lines_in_fixed_order():
    s = ReportSections(technique="PA and lateral", indication="Dyspnea", comparison="Prior from last week")
    _, clinical = build_prompt(s)
    lines = clinical.split("\n")
    assert lines[0] == base_instruction() + " Following clinical context:"
    assert lines[1:] == ["Indication: Dyspnea", "Comparison: Prior from last week", "Technique: PA and lateral"]


def test_blank_sections_are_omitted():
    _, clinical = build_prompt(ReportSections(history="  ", indication="Cough"))
    assert "History" not in clinical and clinical.endswith("Indication: Cough")


def test_impression_target():
    _, clinical = build_prompt(ReportSections(target="Impression"))
    assert "impression" in clinical
    with pytest.raises(ValueError):
        ReportSections(target="Conclusion")


def test_parse_sections_file(tmp_path):
    f = tmp_path / "s.txt"
    f.write_text("HISTORY: smoker\nFoo: ignored\nIndication: chest pain: acute\n")
    s = ReportSections.from_file(f)
    assert s.history == "smoker" and s.indication == "chest pain: acute"


def test_assemble_places_image_between_prompts():
    text = assemble(ReportSections(indication="Fever"))
    system, image, rest = text.split("\n", 2)
    assert system == SYSTEM_PROMPT and image == IMAGE_PLACEHOLDER
    assert rest.startswith("Provide")
