"""Regenerate the bundled fixture corpora and replay transcripts.

    python scripts/build_fixtures.py

Writes src/ruleflow/data/{mini_corpus,dependency_examples}.json and the
JSONL transcripts under src/ruleflow/data/transcripts/.
"""

from __future__ import annotations

from pathlib import Path

from ruleflow.corpus import DependencyLabel, Document, Relation, save_corpus
from ruleflow.fixtures import write_bundled_transcripts
from ruleflow.rules import parse_rule

DATA = Path(__file__).resolve().parents[1] / "src" / "ruleflow" / "data"

S, C, P = Relation.SEQUENTIAL, Relation.CONDITIONAL, Relation.PARALLEL


def doc(id, domain, text, rules, deps):
    return Document(
        id=id,
        domain=domain,
        text=text,
        rules=tuple(parse_rule(r) for r in rules),
        dependencies=tuple(DependencyLabel(a, b, k, t) for a, b, k, t in deps),
        source="collected",
    )


FLIGHT = doc(
    "flight-booking", "flight booking",
    "When booking a flight, passengers first need to select the flight type, including "
    "domestic flight and international flight. After confirming the flight type, passengers "
    "must fill in travel information, including departure city, destination city, and "
    "departure time. Next, passengers need to choose a cabin class, such as economy class, "
    "business class, or first class. Then, passengers must also provide the number of "
    "travelers and the payment method. The number of travelers can be single or multiple; "
    "payment methods include credit card, Alipay, and WeChat Pay.",
    [
        "1. < <Flight Type, includes, domestic flight, international flight>, fill in travel information>",
        "2. < <Travel Information, includes, departure city, destination city, departure time>, choose a cabin class>",
        "3. < <Cabin Class, includes, economy class, business class, first class>, provide the number of travelers and payment method>",
        "4. < <Number of Passengers, includes, single, multiple>, None>",
        "5. < <Payment Methods, includes, credit card, Alipay and WeChat Pay>, None>",
    ],
    [(0, 1, S, None), (1, 2, S, None), (2, 3, S, None), (2, 4, S, None), (3, 4, P, None)],
)

DEPOSIT = doc(
    "foreign-currency-deposit", "banking",
    "If a customer wishes to make a deposit of foreign currency cash, they must first choose "
    "the type of foreign currency cash deposit service. Our bank mainly supports four types of "
    "services: regular current deposit, call deposit, flexible fixed-term deposit, and "
    "fixed-term lump-sum deposit. If the customer selects a regular current deposit, they must "
    "further choose the currency for the regular current deposit. The supported currencies for "
    "regular current deposits include as many as 24 foreign currencies, such as the US dollar, "
    "Japanese yen, British pound, and Hong Kong dollar. After selecting the currency, the "
    "customer needs to provide the deposit amount for the regular current deposit. If the "
    "customer selects a call deposit, flexible fixed-term deposit, or fixed-term lump-sum "
    "deposit, they must further choose the currency for these services. The supported "
    "currencies for these types include up to 9 foreign currencies, such as the Singapore "
    "dollar, US dollar, and Euro. After selecting the currency, the customer needs to provide "
    "the deposit amount for the respective service.\n"
    "The requirements for the deposit amount of both regular current deposits and other "
    "deposit types are as follows:\n"
    "If the deposit amount is less than or equal to the equivalent of USD 10,000, the customer "
    "must provide a valid identification document.\n"
    "If the deposit amount exceeds the equivalent of USD 10,000, the customer must provide a "
    "valid identification document along with the PRC Customs Declaration Form for Inbound "
    "Passenger Luggage with a customs stamp or a cash withdrawal receipt issued by the original "
    "deposit bank.",
    [
        "1. < <Business Type, includes, Regular Current Deposit, Call Deposit, Flexible Fixed-Term Deposit, Fixed-Term Lump-Sum Deposit>, None>",
        "2. < <Business Type, equals, Regular Current Deposit>, Choose currency for regular current deposit>",
        "3. < <Business Type, equals, Call Deposit, Flexible Fixed-Term Deposit, or Fixed-Term Lump-Sum Deposit>, Choose currency for other deposit types>",
        "4. < <Regular Current Deposit Currency, includes, USD, JPY, GBP, HKD, up to 24 currencies>, None>",
        "5. < <Regular Current Deposit Currency, equals, USD, JPY, GBP, HKD, etc.>, Provide deposit amount for regular current deposit>",
        "6. < <Other Deposit Currency, includes, SGD, USD, EUR, up to 9 currencies>, None>",
        "7. < <Other Deposit Currency, equals, SGD, USD, EUR, etc.>, Provide deposit amount for other deposit types>",
        "8. < <Regular Current Deposit Amount, less than or equal to, equivalent of USD 10,000>, Provide valid ID document>",
        "9. < <Regular Current Deposit Amount, greater than, equivalent of USD 10,000>, Provide valid ID document and PRC Customs Declaration Form with stamp or withdrawal receipt from original deposit bank>",
        "10. < <Other Deposit Amount, less than or equal to, equivalent of USD 10,000>, Provide valid ID document>",
        "11. < <Other Deposit Amount, greater than, equivalent of USD 10,000>, Provide valid ID document and PRC Customs Declaration Form with stamp or withdrawal receipt from original deposit bank>",
    ],
    [
        (0, 1, C, "Regular Current Deposit"),
        (0, 2, C, "Call Deposit, Flexible Fixed-Term Deposit, or Fixed-Term Lump-Sum Deposit"),
        (1, 3, S, None), (3, 4, S, None), (4, 7, S, None), (4, 8, S, None),
        (2, 5, S, None), (5, 6, S, None), (6, 9, S, None), (6, 10, S, None),
    ],
)

ECOMMERCE = doc(
    "ecommerce-shopping", "e-commerce",
    "When shopping on an e-commerce platform, the customer first needs to select a shopping "
    "type, which includes product brand, product price, and product category. After selecting "
    "the shopping type, the customer is required to provide product information, including the "
    "product name, specification, quantity, etc. Next, the customer needs to choose a payment "
    "method, which can be WeChat Pay, Alipay, or credit card. Then, the customer must "
    "simultaneously provide delivery address and invoice type. The delivery address includes "
    "province, city, street, and house number; the invoice type includes electronic invoice "
    "and paper invoice.",
    [
        "1. < <Shopping Type, includes, Product Brand, Product Price, Product Category>, Provide Product Information >",
        "2. < <Product Information, includes, Product Name, Specification, Quantity, etc.>, Choose Payment Method >",
        "3. < <Payment Method, includes, WeChat Pay, Alipay, or Credit Card>, Provide Delivery Address and Invoice Type >",
        "4. < <Delivery Address, includes, Province, City, Street, House Number>, None >",
        "5. < <Invoice Type, includes, Electronic Invoice and Paper Invoice>, None >",
    ],
    [(0, 1, S, None), (1, 2, S, None), (2, 3, S, None), (2, 4, S, None), (3, 4, P, None)],
)

BANKING_CHAIN = doc(
    "banking-sequential", "banking",
    "Our bank supports up to 39 currency types of popular countries or regions around the "
    "world, including RMB, USD, JPY, GBP, and HKD. After selecting the appropriate currency, "
    "the customer needs to choose the corresponding cash or remittance type based on the type "
    "of business to be conducted thereafter. The cash or remittance type includes cash and "
    "remittance. Upon completing the cash/remittance type selection, the customer needs to "
    "provide the purchase amount.",
    [
        "< <currency types, includes, RMB, USD, JPY, GBP, HKD>, choose the corresponding cash or remittance type>",
        "< <The cash or remittance type, includes, cash, remittance>, the customer needs to provide the purchase amount>",
        "< <purchase amount, greater than, 0>, None>",
    ],
    [(0, 1, S, None), (1, 2, S, None)],
)

CAR_RENTAL = doc(
    "car-rental-conditional", "car rental",
    "When choosing a car rental service, the user first needs to select the vehicle type, "
    "which can be a sedan, SUV, business vehicle, or RV. If the user chooses a sedan or SUV, "
    "they will need to further choose the rental duration, with options like 1 day, 1 week, or "
    "1 month. If the user chooses a business vehicle or RV, they will need to choose the rental "
    "purpose, which could be for travel, road trips, or business activities. After selecting "
    "the rental duration, the user will also need to choose whether to purchase insurance.",
    [
        "< <vehicle type, includes, sedan, SUV, business vehicle, RV>, None>",
        "< <rental duration, includes, 1 day, 1 week, 1 month>, choose whether to purchase insurance>",
        "< <rental purpose, includes, travel, road trips, business activities>, None>",
        "< <purchase insurance, includes, yes, no>, None>",
    ],
    [(0, 1, C, "sedan, SUV"), (0, 2, C, "business vehicle, RV"), (1, 3, S, None)],
)

TRAINING = doc(
    "training-parallel", "education",
    "When signing up for an educational training course, the user first needs to choose the "
    "course type, such as programming, design, marketing, etc. After selecting the course type, "
    "the user needs to simultaneously choose the instruction mode and course duration. The "
    "instruction mode includes online courses and in-person courses, and the course duration "
    "can be 1 month, 3 months, or 6 months. After selecting the instruction mode and course "
    "duration, the user will need to choose the learner's age group, which could be adults or "
    "teenagers. Then, the user will proceed to the tuition payment.",
    [
        "< <course type, includes, programming, design, marketing>, choose the instruction mode and course duration>",
        "< <instruction mode, includes, online courses, in-person courses>, choose the learner's age group>",
        "< <course duration, includes, 1 month, 3 months, 6 months>, choose the learner's age group>",
        "< <learner's age group, includes, adults, teenagers>, proceed to the tuition payment>",
    ],
    [(0, 1, S, None), (0, 2, S, None), (1, 2, P, None), (1, 3, S, None), (2, 3, S, None)],
)


def main() -> None:
    save_corpus([FLIGHT, DEPOSIT, ECOMMERCE], DATA / "mini_corpus.json")
    save_corpus([BANKING_CHAIN, CAR_RENTAL, TRAINING], DATA / "dependency_examples.json")
    for path in write_bundled_transcripts(DATA / "transcripts"):
        print("wrote", path)


if __name__ == "__main__":
    main()
