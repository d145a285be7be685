"""Hand-written fixtures shared by unit and acceptance tests."""

from exemplar_dialog.corpus import GoalSpec

DELEX_ONTOLOGY = {
    "hotel-phone": ["01223 362456", "01223362456", "01223 356354"],
    "restaurant-phone": ["01223 351707", "01223-355166"],
    "attraction-phone": ["01223 336265"],
    "police-phone": ["01223358966"],
    "hospital-phone": ["01223 245151"],
    "taxi-phone": ["07218068540", "07791 546200"],
    "hotel-ref": ["ZH5BLRT1", "7GAWK763"],
    "restaurant-reference": ["BPI5WWAQ", "F2LN9CLA"],
    "train-reference": ["UZ5SP1AA", "TQIX3EOQ"],
    "train-trainid": ["TR7075", "TR1634", "TR4003"],
    "hotel-area": ["north", "centre"],
    "restaurant-name": ["pizza hut city centre"],
}

# (input, expected) pairs; expected strings are exact outputs
DELEX_CASES = [
    ("The phone number is 01223 362456.", "The phone number is hotel-phone."),
    ("You can reach them on 01223362456", "You can reach them on hotel-phone"),
    ("Call 01223 356354 for the guesthouse.", "Call hotel-phone for the guesthouse."),
    ("Their number is 01223 351707 and they open at 11.", "Their number is restaurant-phone and they open at 11."),
    ("Phone them at 01223-355166, please.", "Phone them at restaurant-phone, please."),
    ("The museum's phone is 01223 336265.", "The museum's phone is attraction-phone."),
    ("Parkside police can be reached at 01223358966.", "Parkside police can be reached at police-phone."),
    ("The hospital number is 01223 245151", "The hospital number is hospital-phone"),
    ("Your taxi contact number is 07218068540.", "Your taxi contact number is taxi-phone."),
    ("Contact number: 07791 546200. Enjoy!", "Contact number: taxi-phone. Enjoy!"),
    ("Booking was successful. Reference number is : ZH5BLRT1 .",
     "Booking was successful. Reference number is : hotel-reference ."),
    ("Your reference is 7gawk763, anything else?", "Your reference is hotel-reference, anything else?"),
    ("Table booked, reference BPI5WWAQ.", "Table booked, reference restaurant-reference."),
    ("I have booked it, ref F2LN9CLA", "I have booked it, ref restaurant-reference"),
    ("Tickets booked, reference UZ5SP1AA.", "Tickets booked, reference train-reference."),
    ("The reference is TQIX3EOQ and the fee is 10 pounds.", "The reference is train-reference and the fee is 10 pounds."),
    ("TR7075 leaves at 09:01.", "train-trainid leaves at 09:01."),
    ("How about tr1634? It arrives by 12:00.", "How about train-trainid? It arrives by 12:00."),
    ("I booked TR4003 for you, reference TQIX3EOQ.", "I booked train-trainid for you, reference train-reference."),
    ("Take TR7075 or TR1634.", "Take train-trainid or train-trainid."),
    ("The hotel phone is 01223 362456 and your reference is ZH5BLRT1.",
     "The hotel phone is hotel-phone and your reference is hotel-reference."),
    ("Sure, it's in the north. Phone 01223 351707.", "Sure, it's in the north. Phone restaurant-phone."),
    ("No number like TR70751 exists.", "No number like TR70751 exists."),
    ("Pizza hut city centre is cheap.", "Pizza hut city centre is cheap."),
    ("Is there anything else I can help with?", "Is there anything else I can help with?"),
]

# Inform/request fixture --------------------------------------------------------

IR_DATABASE = {
    "restaurant": [
        {"name": "golden wok", "area": "north", "food": "chinese", "pricerange": "moderate", "phone": "01223350688"},
        {"name": "royal spice", "area": "north", "food": "indian", "pricerange": "cheap", "phone": "01733553355"},
    ],
    "hotel": [
        {"name": "acorn guest house", "area": "north", "stars": "4", "pricerange": "moderate", "phone": "01223353888"},
        {"name": "gonville hotel", "area": "centre", "stars": "3", "pricerange": "expensive", "phone": "01223366611"},
    ],
    "train": [
        {"trainid": "tr1234", "departure": "cambridge", "destination": "ely", "day": "monday", "price": "4.40 pounds"},
    ],
}

IR_ONTOLOGY = {
    "restaurant-name": ["golden wok", "royal spice"],
    "restaurant-phone": ["01223350688", "01733553355"],
    "restaurant-postcode": ["cb43hl", "cb42nz"],
    "hotel-name": ["acorn guest house", "gonville hotel"],
    "hotel-phone": ["01223353888", "01223366611"],
    "train-trainid": ["tr1234"],
    "train-price": ["4.40 pounds"],
}

IR_GOALS = {
    # d1: satisfying restaurant, phone via placeholder and postcode via value
    "d1": GoalSpec.from_json({"restaurant": {"constraints": {"area": "north", "food": "chinese"},
                                             "requested": ["phone", "postcode"]}}),
    # d2: offers the wrong hotel (centre instead of north), reference given, phone not
    "d2": GoalSpec.from_json({"hotel": {"constraints": {"area": "north", "stars": "4"},
                                        "requested": ["reference", "phone"]}}),
    # d3: restaurant satisfied, train satisfied through the placeholder; price requested and given
    "d3": GoalSpec.from_json({"restaurant": {"constraints": {"food": "indian", "pricerange": "cheap"},
                                             "requested": []},
                              "train": {"constraints": {"departure": "cambridge", "destination": "ely"},
                                        "requested": ["price", "trainid"]}}),
    # d4: hotel satisfied, restaurant never named; nothing requested is provided
    "d4": GoalSpec.from_json({"hotel": {"constraints": {"area": "north"}, "requested": ["phone"]},
                              "restaurant": {"constraints": {"food": "chinese"}, "requested": ["phone"]}}),
}

IR_GENERATED = {
    "d1": ["golden wok is a chinese place in the north .", "the phone is restaurant-phone and the postcode is cb43hl ."],
    "d2": ["gonville hotel is a nice place .", "booked , reference hotel-reference ."],
    "d3": ["royal spice serves cheap indian food .", "train-trainid leaves cambridge , it costs 4.40 pounds ."],
    "d4": ["i recommend acorn guest house .", "is there anything else ?"],
}

# Inform: d1 yes, d2 no, d3 yes, d4 no -> 2/4 = 50.0
# Request: d1 2/2, d2 1/2, d3 2/2, d4 0/2 -> 5/8 = 62.5
IR_EXPECTED = (50.0, 62.5)
