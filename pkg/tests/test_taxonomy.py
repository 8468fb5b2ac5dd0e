import pytest

from docstage.taxonomy import (HIGH_LEVEL_CATEGORIES, UNMAPPED, TaxonomyError,
                               load_activity_sets, load_taxonomy)


def tsv(*rows):
    return ["command\tcategory\thigh_level"] + list(rows)


class TestLoadTaxonomy:
    def test_basic_row(self):
        tax = load_taxonomy(tsv("NewComment\tComments\tCommunicating"))
        assert tax.entries["NewComment"] == ("Comments", "Communicating")

    def test_duplicate_command_rejected(self):
        with pytest.raises(TaxonomyError, match="duplicate"):
            load_taxonomy(tsv("X\tA\tEditing", "X\tB\tEditing"))

    def test_category_with_two_high_levels_rejected(self):
        with pytest.raises(TaxonomyError, match="Comments"):
            load_taxonomy(tsv("A\tComments\tCommunicating", "B\tComments\tEditing"))

    def test_unknown_high_level_rejected(self):
        with pytest.raises(TaxonomyError, match="Chatting"):
            load_taxonomy(tsv("A\tComments\tChatting"))

    def test_header_required(self):
        with pytest.raises(TaxonomyError):
            load_taxonomy(["A\tB\tEditing"])
        with pytest.raises(TaxonomyError):
            load_taxonomy([])

    def test_empty_taxonomy_valid(self):
        tax = load_taxonomy(tsv())
        assert tax.stats() == (0, 0, 0)

    def test_comment_lines_allowed(self):
        tax = load_taxonomy(["command\tcategory\thigh_level",
                             "# just a note",
                             "# a comment\twith\ttabs",
                             "Bold\tFormatting\tEditing"])
        assert tax.stats() == (1, 1, 1)

    def test_wrong_column_count(self):
        with pytest.raises(TaxonomyError, match="3 columns"):
            load_taxonomy(tsv("OnlyTwo\tFields"))


class TestClassify:
    def test_select_table(self, taxonomy):
        assert taxonomy.classify("SelectTable") == ("SelectObject", "Selecting")

    def test_insert_citation(self, taxonomy):
        assert taxonomy.classify("InsertCitation") == ("Adding", "Adding Content")

    def test_unmapped(self, taxonomy):
        assert taxonomy.classify("FooBar") == UNMAPPED == ("Unknown", "Unknown")

    def test_case_sensitive(self, taxonomy):
        assert taxonomy.classify("selecttable") == UNMAPPED

    def test_category_determines_high_level(self, taxonomy):
        seen = {}
        for command in taxonomy.commands:
            category, high_level = taxonomy.classify(command)
            assert seen.setdefault(category, high_level) == high_level


class TestStats:
    def test_default_file_has_ten_high_levels(self, taxonomy):
        commands, categories, high_levels = taxonomy.stats()
        assert high_levels == 10
        assert categories == 27
        assert commands >= 100
        assert taxonomy.high_levels == HIGH_LEVEL_CATEGORIES

    def test_three_commands_one_category(self):
        tax = load_taxonomy(tsv("A\tC\tEditing", "B\tC\tEditing", "D\tC\tEditing"))
        assert tax.stats() == (3, 1, 1)


class TestActivitySets:
    def test_load(self):
        sets = load_activity_sets(["activity\tcommand",
                                   "Tables\tTableInsert",
                                   "Tables\tSelectTable",
                                   "Font\tBold"])
        assert sets == {"Tables": frozenset({"TableInsert", "SelectTable"}),
                        "Font": frozenset({"Bold"})}

    def test_duplicate_member_rejected(self):
        with pytest.raises(TaxonomyError, match="duplicate"):
            load_activity_sets(["activity\tcommand", "A\tX", "A\tX"])

    def test_header_required(self):
        with pytest.raises(TaxonomyError):
            load_activity_sets(["A\tX"])

    def test_default_sets_reference_known_commands(self, taxonomy, activity_sets):
        for activity, commands in activity_sets.items():
            for command in commands:
                assert command in taxonomy.commands, (activity, command)
