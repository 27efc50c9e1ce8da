#include <gtest/gtest.h>

#include <chrono>

#include "gridwh/json.hpp"
#include "gridwh/rpc_server.hpp"
#include "gridwh/wire.hpp"
#include "support.hpp"

using namespace gridwh;
using namespace gridwh::wire;

namespace {

MethodCall ping_call(std::string id = "0") {
  return MethodCall{std::move(id), "registry", std::nullopt, std::nullopt, "ping", {}};
}

FaultCode fault_code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const FaultError& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected a FaultError";
  return FaultCode::backend_failure;
}

}  // namespace

TEST(Value, DepthCountsScalarsAsOne) {
  EXPECT_EQ(Value(1).depth(), 1);
  EXPECT_EQ(Value(Value::List{}).depth(), 1);
  EXPECT_EQ(Value(Value::List{Value(1)}).depth(), 2);
  EXPECT_EQ(Value(Value::Map{{"a", Value::List{Value(Value::Map{})}}}).depth(), 3);
}

TEST(Value, AccessorMismatchIsBadRequest) {
  EXPECT_EQ(fault_code_of([] { (void)Value("x").as_int(); }), FaultCode::bad_request);
  EXPECT_DOUBLE_EQ(Value(3).as_real(), 3.0);
}

TEST(Json, RejectsNonFiniteAndOverDeep) {
  EXPECT_EQ(fault_code_of([] { (void)to_json(Value(std::numeric_limits<double>::infinity())); }),
            FaultCode::bad_request);
  Value deep = Value(1);
  for (int i = 0; i < Value::kMaxDepth; ++i) deep = Value(Value::List{deep});
  EXPECT_EQ(fault_code_of([&] { (void)to_json(deep); }), FaultCode::bad_request);
}

TEST(Json, HugeUnsignedIsBadRequest) {
  EXPECT_EQ(fault_code_of([] { (void)from_json(parse_json_text("18446744073709551615")); }), FaultCode::bad_request);
  EXPECT_EQ(from_json(parse_json_text("9223372036854775807")), Value(std::numeric_limits<std::int64_t>::max()));
}

TEST(Json, DeepNestingRejectedWithoutCrash) {
  std::string text(100000, '[');
  EXPECT_EQ(fault_code_of([&] { (void)parse_json_text(text); }), FaultCode::bad_request);
}

TEST(Marshal, GoldenPingRequest) {
  EXPECT_EQ(marshal_request(ping_call()),
            R"({"envelope":{"header":{"id":"0","service":"registry","session":null,"token":null},)"
            R"("body":{"method":"ping","params":{}}}})");
}

TEST(Marshal, ParamsAppearVerbatim) {
  auto call = ping_call();
  call.params = {{"dataset", "events"}};
  EXPECT_NE(marshal_request(call).find(R"("params":{"dataset":"events"})"), std::string::npos);
}

TEST(Marshal, GoldenResultAndFault) {
  EXPECT_EQ(marshal_response("7", Value(true)), R"({"envelope":{"header":{"id":"7"},"body":{"result":true}}})");
  auto bytes = marshal_response("7", Fault{FaultCode::unknown_method, "nope", std::nullopt});
  EXPECT_NE(bytes.find(R"("fault":{"code":"unknown-method")"), std::string::npos);
}

TEST(Unmarshal, InverseOfGolden) {
  auto bytes = marshal_request(ping_call());
  EXPECT_EQ(unmarshal_request(bytes), ping_call());
}

TEST(Unmarshal, MalformedIsParseError) {
  EXPECT_EQ(fault_code_of([] { (void)unmarshal_request("{"); }), FaultCode::parse_error);
  EXPECT_EQ(fault_code_of([] { (void)unmarshal_response("{"); }), FaultCode::parse_error);
}

TEST(Unmarshal, TolerantReaderIgnoresExtraFields) {
  std::string bytes =
      R"({"envelope":{"header":{"id":"0","trace":"x","service":"registry","session":null,"token":null},)"
      R"("body":{"method":"ping","params":{},"extra":[1,2]},"more":1},"top":true})";
  EXPECT_EQ(unmarshal_request(bytes), ping_call());
}

TEST(Unmarshal, MissingFieldsAreBadRequest) {
  EXPECT_EQ(fault_code_of([] { (void)unmarshal_request(R"({"envelope":{"header":{"id":"1"}}})"); }),
            FaultCode::bad_request);
  EXPECT_EQ(fault_code_of([] {
              (void)unmarshal_request(
                  R"({"envelope":{"header":{"id":"","service":"s"},"body":{"method":"m","params":{}}}})");
            }),
            FaultCode::bad_request);
}

TEST(Unmarshal, ResponseResultAndFault) {
  auto r = unmarshal_response(marshal_response("9", Value(42)));
  EXPECT_EQ(r.id, "9");
  ASSERT_FALSE(r.is_fault());
  EXPECT_EQ(r.result(), Value(42));

  auto f = unmarshal_response(marshal_response("9", Fault{FaultCode::timeout, "slow", std::nullopt}));
  ASSERT_TRUE(f.is_fault());
  EXPECT_EQ(f.fault().code, FaultCode::timeout);
}

TEST(Unmarshal, ResultAndFaultAreExclusive) {
  std::string both =
      R"({"envelope":{"header":{"id":"1"},"body":{"result":1,"fault":{"code":"timeout","message":""}}}})";
  EXPECT_EQ(fault_code_of([&] { (void)unmarshal_response(both); }), FaultCode::bad_request);
  std::string neither = R"({"envelope":{"header":{"id":"1"},"body":{}}})";
  EXPECT_EQ(fault_code_of([&] { (void)unmarshal_response(neither); }), FaultCode::bad_request);
}

TEST(Unmarshal, ResultNullIsAResult) {
  auto r = unmarshal_response(marshal_response("1", Value()));
  ASSERT_FALSE(r.is_fault());
  EXPECT_TRUE(r.result().is_null());
}

TEST(Unmarshal, UnknownFaultCodeIsBadRequest) {
  std::string bytes = R"({"envelope":{"header":{"id":"1"},"body":{"fault":{"code":"oops","message":""}}}})";
  EXPECT_EQ(fault_code_of([&] { (void)unmarshal_response(bytes); }), FaultCode::bad_request);
}

TEST(Marshal, OversizeEnvelopeRejected) {
  auto call = ping_call();
  call.params = {{"blob", std::string(kMaxEnvelopeBytes, 'x')}};
  EXPECT_EQ(fault_code_of([&] { (void)marshal_request(call); }), FaultCode::bad_request);
}

TEST(RoundTrip, GeneratedCallsAndResponses) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 500; ++i) {
    auto call = testkit::random_call(rng);
    auto bytes = marshal_request(call);
    EXPECT_EQ(unmarshal_request(bytes), call);
    EXPECT_EQ(marshal_request(call), bytes);  // deterministic

    auto result = testkit::random_value(rng, 8);
    auto r = unmarshal_response(marshal_response(call.id, result));
    EXPECT_EQ(r.id, call.id);
    EXPECT_EQ(r.outcome, (Reply{result}));

    auto fault = testkit::random_fault(rng);
    auto f = unmarshal_response(marshal_response(call.id, fault));
    EXPECT_EQ(f.outcome, (Reply{fault}));
  }
}

// Dispatch ------------------------------------------------------------------

namespace {

HandlerTable sample_handlers() {
  HandlerTable h;
  h["ping"] = [](const MethodCall&) -> Reply { return Value(Value::Map{{"pong", 1}}); };
  h["deny"] = [](const MethodCall&) -> Reply { return Fault{FaultCode::access_denied, "no", std::nullopt}; };
  h["throws"] = [](const MethodCall&) -> Reply { throw FaultError(FaultCode::unknown_dataset, "gone"); };
  h["boom"] = [](const MethodCall&) -> Reply { throw std::runtime_error("boom"); };
  return h;
}

Response dispatch_call(const MethodCall& call, std::optional<std::string_view> service = std::nullopt) {
  return unmarshal_response(dispatch(sample_handlers(), marshal_request(call), service));
}

}  // namespace

TEST(Dispatch, RoutesToHandler) {
  auto r = dispatch_call(ping_call("5"));
  EXPECT_EQ(r.id, "5");
  ASSERT_FALSE(r.is_fault());
  EXPECT_NE(r.result().find("pong"), nullptr);
}

TEST(Dispatch, MissingHandlerIsUnknownMethod) {
  auto call = ping_call("6");
  call.method = "nope";
  auto r = dispatch_call(call);
  ASSERT_TRUE(r.is_fault());
  EXPECT_EQ(r.fault().code, FaultCode::unknown_method);
  EXPECT_EQ(r.id, "6");
}

TEST(Dispatch, HandlerFaultPassesThroughWithSameId) {
  auto call = ping_call("abc");
  call.method = "deny";
  auto r = dispatch_call(call);
  EXPECT_EQ(r.id, "abc");
  ASSERT_TRUE(r.is_fault());
  EXPECT_EQ(r.fault().code, FaultCode::access_denied);

  call.method = "throws";
  EXPECT_EQ(dispatch_call(call).fault().code, FaultCode::unknown_dataset);
  call.method = "boom";
  EXPECT_EQ(dispatch_call(call).fault().code, FaultCode::backend_failure);
}

TEST(Dispatch, ServiceFilterSparesPing) {
  auto call = ping_call();
  call.service = "elsewhere";
  call.method = "deny";
  EXPECT_EQ(dispatch_call(call, "site-a").fault().code, FaultCode::unknown_service);
  call.method = "ping";
  EXPECT_FALSE(dispatch_call(call, "site-a").is_fault());
}

TEST(Dispatch, GarbageYieldsFaultEnvelope) {
  auto r = unmarshal_response(dispatch(sample_handlers(), "not json"));
  ASSERT_TRUE(r.is_fault());
  EXPECT_EQ(r.fault().code, FaultCode::parse_error);
  EXPECT_EQ(r.id, "unknown");

  auto salvaged = unmarshal_response(dispatch(sample_handlers(), R"({"envelope":{"header":{"id":"42"}}})"));
  EXPECT_EQ(salvaged.id, "42");
  EXPECT_EQ(salvaged.fault().code, FaultCode::bad_request);
}

TEST(Dispatch, TotalOverRandomBytes) {
  std::mt19937_64 rng(5);
  auto handlers = sample_handlers();
  auto valid = marshal_request(ping_call());
  for (int i = 0; i < 2000; ++i) {
    std::string bytes;
    if (i % 2 == 0) {
      bytes.resize(rng() % 64);
      for (auto& c : bytes) c = static_cast<char>(rng());
    } else {
      // mutate a valid envelope
      bytes = valid;
      for (int k = 0; k < 3; ++k) bytes[rng() % bytes.size()] = static_cast<char>(rng());
    }
    std::string out;
    ASSERT_NO_THROW(out = dispatch(handlers, bytes));
    ASSERT_NO_THROW((void)unmarshal_response(out)) << out;
  }
}

// Live transport ---------------------------------------------------------------

TEST(Invoke, LiveServicePing) {
  auto site = testkit::start_site("site-a", dbs::Dialect::ansi);
  auto call = ping_call("p1");
  call.service = "site-a";
  auto r = invoke(site->endpoint(), call, 2000);
  EXPECT_EQ(r.id, "p1");
  ASSERT_FALSE(r.is_fault()) << r.fault().message;
  EXPECT_NE(r.result().find("pong"), nullptr);
}

TEST(Invoke, ClosedPortIsUnreachable) {
  auto r = invoke(testkit::dead_endpoint(), ping_call(), 2000);
  ASSERT_TRUE(r.is_fault());
  EXPECT_EQ(r.fault().code, FaultCode::unreachable);
  EXPECT_EQ(r.id, "0");
}

TEST(Invoke, SlowServiceTimesOut) {
  auto site = testkit::start_site("slow", dbs::Dialect::ansi, 100);
  auto r = invoke(site->endpoint(), ping_call(), 1);
  ASSERT_TRUE(r.is_fault());
  EXPECT_EQ(r.fault().code, FaultCode::timeout);
}

TEST(Invoke, OversizeRequestIsBadRequestLocally) {
  auto site = testkit::start_site("site-a", dbs::Dialect::ansi);
  auto call = ping_call();
  call.params = {{"blob", std::string(kMaxEnvelopeBytes, 'x')}};
  auto r = invoke(site->endpoint(), call, 2000);
  ASSERT_TRUE(r.is_fault());
  EXPECT_EQ(r.fault().code, FaultCode::bad_request);
}

TEST(Endpoint, ParseRules) {
  auto ep = Endpoint::parse("http://127.0.0.1:8080/rpc");
  EXPECT_EQ(ep.host(), "127.0.0.1");
  EXPECT_EQ(ep.port(), 8080);
  for (const char* bad : {"https://h:1/rpc", "http://h/rpc", "http://h:0/rpc", "http://h:70000/rpc",
                          "http://:80/rpc", "http://h:80/", "http://h:80/rpc/x", "http://h:8a/rpc"}) {
    EXPECT_EQ(fault_code_of([&] { (void)Endpoint::parse(bad); }), FaultCode::bad_request) << bad;
  }
}

TEST(RpcServer, StopThenUnreachable) {
  HandlerTable h;
  h["ping"] = [](const MethodCall&) -> Reply { return Value(1); };
  RpcServer server(h, {});
  server.start();
  auto ep = server.endpoint();
  EXPECT_FALSE(invoke(ep, ping_call(), 2000).is_fault());
  server.stop();
  EXPECT_FALSE(server.running());
  EXPECT_EQ(invoke(ep, ping_call(), 2000).fault().code, FaultCode::unreachable);
}
