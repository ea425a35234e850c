#include <doctest.h>

#include <cmath>
#include <cstring>
#include <map>

#include "mentorkd/distill.hpp"
#include "mentorkd/error.hpp"

using namespace mentorkd;

namespace {

struct Data {
    std::vector<TaskInstance> instances;
    std::vector<QuestionRecord> records;
    DistillationSet teacher_set;
};

Data last_letter(int n, std::uint64_t seed) {
    Data d;
    d.instances = generate_dataset(TaskKind::LastLetter, n, seed, 2);
    d.records = records_of(d.instances);
    TeacherConfig cfg;
    cfg.annotations_per_question = 1;
    cfg.seed = seed;
    d.teacher_set =
        reformat(filter_annotations(annotate_oracle(d.instances, cfg), d.records), d.records, LabelTemplate::Compact);
    return d;
}

TinyTransformer model(const char* preset, ModelRole role, std::uint64_t seed, TaskKind kind = TaskKind::LastLetter) {
    return TinyTransformer(ModelConfig::preset(preset), Tokenizer::for_task(kind), role, seed);
}

bool same_parameters(const TinyTransformer& a, const TinyTransformer& b) {
    for (std::size_t i = 0; i < a.parameters().size(); ++i) {
        const auto& x = a.parameters()[i].value;
        const auto& y = b.parameters()[i].value;
        if (x.size() != y.size() || std::memcmp(x.data(), y.data(), x.size() * sizeof(float)) != 0) return false;
    }
    return true;
}

DistillHyperparameters student_hp(Ablation ablation, double lambda) {
    DistillHyperparameters hp;
    hp.ablation = ablation;
    hp.lambda = lambda;
    hp.temperature = 2.0;
    hp.train.epochs = 2;
    hp.train.batch_size = 16;
    hp.train.learning_rate = 3e-3;
    hp.train.seed = 3;
    return hp;
}

}  // namespace

TEST_CASE("NoSLD student training is trajectory-identical to plain language modelling") {
    const auto d = last_letter(48, 1);
    const auto mentor = model("micro", ModelRole::Mentor, 2);
    auto a = model("micro", ModelRole::Student, 4), b = model("micro", ModelRole::Student, 4),
         c = model("micro", ModelRole::Student, 4);
    const auto hp = student_hp(Ablation::NoSLD, 0.3);
    const auto ra = train_student(a, nullptr, d.teacher_set, hp);
    const auto rb = train_lm(b, d.teacher_set, hp.train);
    const auto rc = train_student(c, &mentor, d.teacher_set, student_hp(Ablation::Full, 0.0));
    REQUIRE(ra.curve.size() == rb.curve.size());
    for (std::size_t i = 0; i < ra.curve.size(); ++i) {
        CHECK(ra.curve[i].loss_total == rb.curve[i].loss_total);
        CHECK(rc.curve[i].loss_total == rb.curve[i].loss_total);
    }
    CHECK(same_parameters(a, b));
    CHECK(same_parameters(c, b));
}

TEST_CASE("full objective logs both components and leaves the mentor untouched") {
    const auto d = last_letter(48, 5);
    const auto mentor = model("student", ModelRole::Mentor, 6);
    const auto snapshot = mentor;
    auto s = model("micro", ModelRole::Student, 7);
    const auto r = train_student(s, &mentor, d.teacher_set, student_hp(Ablation::Full, 0.3));
    REQUIRE(r.curve.size() == 2);
    for (const auto& m : r.curve) {
        CHECK(std::isfinite(m.loss_rd));
        CHECK(std::isfinite(m.loss_sld));
        CHECK(m.loss_sld >= 0.0);
        CHECK(m.loss_total == doctest::Approx(0.7 * m.loss_rd + 0.3 * m.loss_sld).epsilon(1e-4));
    }
    CHECK(same_parameters(mentor, snapshot));

    auto n = model("micro", ModelRole::Student, 7);
    const auto rn = train_student(n, &mentor, d.teacher_set, student_hp(Ablation::NoRD, 0.3));
    for (const auto& m : rn.curve) CHECK(m.loss_total == doctest::Approx(m.loss_sld).epsilon(1e-6));
}

TEST_CASE("student/mentor contract errors") {
    const auto d = last_letter(8, 8);
    auto s = model("micro", ModelRole::Student, 9);
    CHECK_THROWS_AS(train_student(s, nullptr, d.teacher_set, student_hp(Ablation::Full, 0.3)), ConfigError);
    const auto other = model("micro", ModelRole::Mentor, 10, TaskKind::ShuffledObjects);
    CHECK_THROWS_AS(train_student(s, &other, d.teacher_set, student_hp(Ablation::Full, 0.3)), ModelError);
    auto bad = student_hp(Ablation::Full, 1.5);
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("mentor training with zero epochs returns the initial parameters") {
    const auto d = last_letter(8, 11);
    const auto initial = model("micro", ModelRole::Mentor, 12);
    auto m = initial;
    TrainHyperparameters hp;
    hp.epochs = 0;
    train_mentor(m, d.teacher_set, hp);
    CHECK(same_parameters(m, initial));

    auto x = initial, y = initial;
    hp.epochs = 1;
    hp.batch_size = 4;
    hp.learning_rate = 1e-3;
    train_mentor(x, d.teacher_set, hp);
    train_mentor(y, d.teacher_set, hp);
    CHECK(same_parameters(x, y));
    CHECK(!same_parameters(x, initial));
}

TEST_CASE("augmentation accounting") {
    const auto d = last_letter(40, 13);
    auto mentor = model("micro", ModelRole::Mentor, 14);
    AugmentOptions opts;
    opts.max_new_tokens = 48;

    // random mentor: the filter removes (almost) everything
    const auto untrained = augment_with_mentor(mentor, d.records, 1, 15, opts);
    CHECK(untrained.size() <= 1);

    TrainHyperparameters hp;
    hp.epochs = 60;
    hp.batch_size = 8;
    hp.learning_rate = 3e-3;
    train_mentor(mentor, d.teacher_set, hp);

    const auto raw = mentor_annotations(mentor, d.records, 3, 16, opts);
    REQUIRE(raw.size() == 3 * d.records.size());
    std::map<std::int64_t, int> correct;
    for (const auto& a : raw) {
        CHECK(a.source == AnnotationSource::Mentor);
        correct[a.question_id] += a.correct ? 1 : 0;
    }
    const auto set = augment_with_mentor(mentor, d.records, 3, 16, opts);
    CHECK(set.provenance == Provenance::MentorOnly);
    std::map<std::int64_t, int> kept;
    for (const auto& ex : set.examples) {
        ++kept[ex.question_id];
        CHECK(ex.source == AnnotationSource::Mentor);
        CHECK(extract_final_answer(TaskKind::LastLetter, ex.label) == ex.gold_answer);
    }
    int expected = 0;
    for (const auto& [id, c] : correct) {
        expected += c;
        CHECK(kept[id] == c);
        CHECK(c <= 3);
    }
    CHECK(static_cast<int>(set.size()) == expected);
    CHECK(expected > 0);
    CHECK(augment_with_mentor(mentor, d.records, 3, 16, opts) == set);
}
