#include "athena/text.hpp"

#include "doctest.h"

TEST_CASE("utf8 round trip and length") {
    std::string text = "盗窃罪 a案b例";
    auto points = athena::utf8_decode(text);
    CHECK(athena::utf8_encode(points) == text);
    CHECK(athena::utf8_length(text) == 8);
    CHECK(athena::utf8_length("abc") == 3);
}

TEST_CASE("utf8 tail keeps whole characters") {
    std::string text = "abc盗窃罪";
    CHECK(athena::utf8_tail(text, 2) == "窃罪");
    CHECK(athena::utf8_tail(text, 100) == text);
    CHECK(athena::utf8_tail(text, 0) == "");
}

TEST_CASE("trim handles ascii and ideographic space") {
    CHECK(athena::trim("  x  ") == "x");
    CHECK(athena::trim("　盗窃　") == "盗窃");
    CHECK(athena::trim("\r\n\t") == "");
}

TEST_CASE("normalize_label strips bracket decoration") {
    CHECK(athena::normalize_label("[盗窃]") == "盗窃");
    CHECK(athena::normalize_label("  【放火】 ") == "放火");
    CHECK(athena::normalize_label("盗窃。") == "盗窃");
    CHECK(athena::normalize_label("\"theft\"") == "theft");
    CHECK(athena::normalize_label("盗窃") == "盗窃");
    // interior punctuation survives
    CHECK(athena::normalize_label("生产、销售伪劣产品") == "生产、销售伪劣产品");
}

TEST_CASE("fnv1a64 is stable") {
    CHECK(athena::fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(athena::fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(athena::to_hex(0xdeadbeefULL) == "00000000deadbeef");
}

TEST_CASE("placeholder substitution") {
    std::string out = athena::substitute_placeholders(
        "A={X} B={Y} A2={X} C={Z}", {{"X", "1"}, {"Y", "2"}});
    CHECK(out == "A=1 B=2 A2=1 C={Z}");
}
